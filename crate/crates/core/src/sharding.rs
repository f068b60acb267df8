//! Assigning rows to workers and drawing the stratified pilot sample.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::DataShard;
use crate::rng::{child_seed, stream_rng, PILOT_STREAM, SHARD_STREAM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShardingStrategy {
    Random,
    /// Blocks of the order statistics of the row covariate sums.
    #[serde(alias = "nonrandom")]
    CovariateSumOrdered,
    /// Blocks of the rows in their stored order.
    Contiguous,
}

impl std::str::FromStr for ShardingStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(Self::Random),
            "nonrandom" | "covariate-sum" | "covariate-sum-ordered" => Ok(Self::CovariateSumOrdered),
            "contiguous" => Ok(Self::Contiguous),
            other => Err(Error::Config(format!("unknown sharding strategy '{other}'"))),
        }
    }
}

impl std::fmt::Display for ShardingStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Random => "random",
            Self::CovariateSumOrdered => "nonrandom",
            Self::Contiguous => "contiguous",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionPlan {
    /// Worker index of every global row.
    pub assignments: Vec<u32>,
    pub workers: usize,
    pub strategy: ShardingStrategy,
}

impl PartitionPlan {
    pub fn len(&self) -> usize {
        self.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    pub fn shard_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.workers];
        for &a in &self.assignments {
            sizes[a as usize] += 1;
        }
        sizes
    }

    /// Global row indices held by each worker, ascending.
    pub fn rows_by_worker(&self) -> Vec<Vec<usize>> {
        let mut rows = vec![Vec::new(); self.workers];
        for (i, &a) in self.assignments.iter().enumerate() {
            rows[a as usize].push(i);
        }
        rows
    }

    /// Splits a pooled dataset into per-worker shards.
    pub fn split(&self, data: &DataShard) -> Result<Vec<DataShard>> {
        if data.len() != self.len() {
            return Err(Error::Shape(format!("plan covers {} rows, dataset has {}", self.len(), data.len())));
        }
        Ok(self.rows_by_worker().iter().map(|rows| data.select(rows)).collect())
    }
}

fn check_counts(n_rows: usize, workers: usize) -> Result<()> {
    if workers == 0 {
        return Err(Error::Config("at least one worker is required".into()));
    }
    if workers > n_rows {
        return Err(Error::Config(format!("{workers} workers for only {n_rows} rows")));
    }
    Ok(())
}

/// Rank `r` (0-based) of `n` sorted positions goes to worker ⌊rK/N⌋.
fn block_of(rank: usize, n: usize, workers: usize) -> u32 {
    ((rank as u128 * workers as u128) / n as u128) as u32
}

/// Uniform random permutation cut into K near-equal blocks.
pub fn shard_random(n_rows: usize, workers: usize, seed: u64) -> Result<PartitionPlan> {
    check_counts(n_rows, workers)?;
    let mut order: Vec<usize> = (0..n_rows).collect();
    let mut rng = stream_rng(seed, SHARD_STREAM);
    for i in (1..n_rows).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut assignments = vec![0u32; n_rows];
    for (rank, &row) in order.iter().enumerate() {
        assignments[row] = block_of(rank, n_rows, workers);
    }
    Ok(PartitionPlan { assignments, workers, strategy: ShardingStrategy::Random })
}

/// Sorts rows by the sum of their covariates (ties by row index) and gives
/// each worker one contiguous block of the order statistics.
pub fn shard_by_covariate_sum(x: &[f64], dim: usize, workers: usize) -> Result<PartitionPlan> {
    if dim == 0 || !x.len().is_multiple_of(dim) {
        return Err(Error::Shape(format!("{} covariate entries do not form rows of d={dim}", x.len())));
    }
    let n_rows = x.len() / dim;
    check_counts(n_rows, workers)?;
    let sums: Vec<f64> = x.chunks_exact(dim).map(|r| r.iter().sum()).collect();
    if let Some(i) = sums.iter().position(|z| z.is_nan()) {
        return Err(Error::Domain(format!("covariate sum of row {i} is NaN")));
    }
    let mut order: Vec<usize> = (0..n_rows).collect();
    order.sort_by(|&a, &b| sums[a].total_cmp(&sums[b]).then(a.cmp(&b)));
    let mut assignments = vec![0u32; n_rows];
    for (rank, &row) in order.iter().enumerate() {
        assignments[row] = block_of(rank, n_rows, workers);
    }
    Ok(PartitionPlan { assignments, workers, strategy: ShardingStrategy::CovariateSumOrdered })
}

/// Rows in stored order, cut into K blocks.
pub fn shard_contiguous(n_rows: usize, workers: usize) -> Result<PartitionPlan> {
    check_counts(n_rows, workers)?;
    let assignments = (0..n_rows).map(|r| block_of(r, n_rows, workers)).collect();
    Ok(PartitionPlan { assignments, workers, strategy: ShardingStrategy::Contiguous })
}

pub fn make_plan(strategy: ShardingStrategy, data: &DataShard, workers: usize, seed: u64) -> Result<PartitionPlan> {
    match strategy {
        ShardingStrategy::Random => shard_random(data.len(), workers, seed),
        ShardingStrategy::CovariateSumOrdered => shard_by_covariate_sum(data.x(), data.dim(), workers),
        ShardingStrategy::Contiguous => shard_contiguous(data.len(), workers),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PilotSample {
    /// Selected global row ids per worker, ascending.
    pub per_worker_ids: Vec<Vec<u64>>,
    pub n: usize,
    pub seed: u64,
}

/// Splits `n` across workers in proportion to their sizes by the largest
/// remainder method; ties in the remainder go to the lower worker index.
pub fn allocate_pilot(sizes: &[usize], n: usize) -> Result<Vec<usize>> {
    let total: usize = sizes.iter().sum();
    if n == 0 || n > total {
        return Err(Error::Config(format!("pilot size {n} must lie in 1..={total}")));
    }
    let (n128, total128) = (n as u128, total as u128);
    let mut alloc: Vec<usize> = sizes.iter().map(|&s| (n128 * s as u128 / total128) as usize).collect();
    let remainders: Vec<u128> = sizes.iter().map(|&s| n128 * s as u128 % total128).collect();
    let mut left = n - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| remainders[b].cmp(&remainders[a]).then(a.cmp(&b)));
    for &k in &order {
        if left == 0 {
            break;
        }
        alloc[k] += 1;
        left -= 1;
    }
    for (k, (&a, &s)) in alloc.iter().zip(sizes).enumerate() {
        if a > s {
            return Err(Error::Allocation { worker: k, requested: a, available: s });
        }
    }
    Ok(alloc)
}

/// Simple random sample without replacement of `count` positions out of
/// `0..len` (partial Fisher-Yates), returned ascending.
pub fn srswor(len: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if count > len {
        return Err(Error::Config(format!("cannot sample {count} of {len} rows without replacement")));
    }
    let mut pos: Vec<usize> = (0..len).collect();
    let mut rng = stream_rng(seed, PILOT_STREAM);
    for i in 0..count {
        let j = rng.random_range(i..len);
        pos.swap(i, j);
    }
    pos.truncate(count);
    pos.sort_unstable();
    Ok(pos)
}

/// Stratified pilot draw: proportional allocation, then an independent
/// SRSWOR inside each worker keyed by a per-worker child seed.
pub fn draw_pilot(plan: &PartitionPlan, n: usize, seed: u64) -> Result<PilotSample> {
    let rows = plan.rows_by_worker();
    let sizes: Vec<usize> = rows.iter().map(Vec::len).collect();
    let alloc = allocate_pilot(&sizes, n)?;
    let per_worker_ids = rows
        .iter()
        .zip(&alloc)
        .enumerate()
        .map(|(k, (r, &nk))| {
            let picks = srswor(r.len(), nk, child_seed(seed, k as u64))?;
            Ok(picks.into_iter().map(|p| r[p] as u64).collect())
        })
        .collect::<Result<Vec<Vec<u64>>>>()?;
    Ok(PilotSample { per_worker_ids, n, seed })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted_sizes(plan: &PartitionPlan) -> Vec<usize> {
        let mut s = plan.shard_sizes();
        s.sort_unstable_by(|a, b| b.cmp(a));
        s
    }

    #[test]
    fn random_examples() {
        assert_eq!(shard_random(4, 4, 11).unwrap().shard_sizes(), vec![1, 1, 1, 1]);
        assert_eq!(sorted_sizes(&shard_random(10, 3, 11).unwrap()), vec![4, 3, 3]);
        assert!(shard_random(25, 1, 3).unwrap().assignments.iter().all(|&a| a == 0));
        assert!(matches!(shard_random(3, 4, 0), Err(Error::Config(_))));
        assert_eq!(shard_random(100, 7, 5).unwrap(), shard_random(100, 7, 5).unwrap());
        assert_ne!(shard_random(100, 7, 5).unwrap(), shard_random(100, 7, 6).unwrap());
    }

    #[test]
    fn covariate_sum_example() {
        // Single-column rows so the sums are (3, 1, 4, 2).
        let plan = shard_by_covariate_sum(&[3.0, 1.0, 4.0, 2.0], 1, 2).unwrap();
        assert_eq!(plan.rows_by_worker(), vec![vec![1, 3], vec![0, 2]]);
    }

    #[test]
    fn covariate_sum_ties_keep_index_order() {
        let plan = shard_by_covariate_sum(&[1.0; 12], 2, 3).unwrap();
        assert_eq!(plan.rows_by_worker(), vec![vec![0, 1], vec![2, 3], vec![4, 5]]);
        let one = shard_by_covariate_sum(&[5.0, 1.0, 2.0], 1, 1).unwrap();
        assert!(one.assignments.iter().all(|&a| a == 0));
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_pilot(&[100, 300], 40).unwrap(), vec![10, 30]);
        assert_eq!(allocate_pilot(&[3, 3, 4], 10).unwrap(), vec![3, 3, 4]);
        assert_eq!(allocate_pilot(&[5, 5], 3).unwrap(), vec![2, 1]);
        assert!(allocate_pilot(&[5, 5], 0).is_err());
        assert!(allocate_pilot(&[5, 5], 11).is_err());
    }

    #[test]
    fn census_selects_everything() {
        let plan = shard_random(10, 3, 1).unwrap();
        let p = draw_pilot(&plan, 10, 99).unwrap();
        let mut all: Vec<u64> = p.per_worker_ids.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn pilot_ids_belong_to_their_worker() {
        let plan = shard_random(200, 4, 1).unwrap();
        let p = draw_pilot(&plan, 37, 5).unwrap();
        assert_eq!(p.per_worker_ids.iter().map(Vec::len).sum::<usize>(), 37);
        for (k, ids) in p.per_worker_ids.iter().enumerate() {
            assert!(ids.windows(2).all(|w| w[0] < w[1]));
            assert!(ids.iter().all(|&i| plan.assignments[i as usize] as usize == k));
        }
    }

    #[test]
    fn inclusion_rate_matches_design() {
        let plan = shard_contiguous(20, 2).unwrap();
        let mut hits = [0u32; 20];
        let reps = 10_000;
        for s in 0..reps {
            for id in draw_pilot(&plan, 4, s).unwrap().per_worker_ids.concat() {
                hits[id as usize] += 1;
            }
        }
        for h in hits {
            let rate = h as f64 / reps as f64;
            assert!((0.17..=0.23).contains(&rate), "inclusion rate {rate}");
        }
    }

    mod prop {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn plans_partition_all_rows(n in 1usize..300, k in 1usize..12, seed: u64) {
                prop_assume!(k <= n);
                let plan = shard_random(n, k, seed).unwrap();
                let sizes = plan.shard_sizes();
                prop_assert!(sizes.iter().all(|&s| s >= 1));
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                let mut all: Vec<usize> = plan.rows_by_worker().concat();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            }

            #[test]
            fn ordered_plan_means_are_nondecreasing(
                xs in proptest::collection::vec(-5.0f64..5.0, 6..240),
                k in 1usize..6,
            ) {
                let dim = 2;
                let n = xs.len() / dim;
                prop_assume!(k <= n);
                let x = &xs[..n * dim];
                let plan = shard_by_covariate_sum(x, dim, k).unwrap();
                let means: Vec<f64> = plan
                    .rows_by_worker()
                    .iter()
                    .map(|rows| rows.iter().map(|&r| x[2 * r] + x[2 * r + 1]).sum::<f64>() / rows.len() as f64)
                    .collect();
                prop_assert!(means.windows(2).all(|w| w[0] <= w[1] + 1e-12));
            }

            #[test]
            fn allocation_sums_exactly(sizes in proptest::collection::vec(1usize..500, 1..10), frac in 0.0f64..1.0) {
                let total: usize = sizes.iter().sum();
                let n = ((total as f64 * frac).ceil() as usize).clamp(1, total);
                let alloc = allocate_pilot(&sizes, n).unwrap();
                prop_assert_eq!(alloc.iter().sum::<usize>(), n);
                prop_assert!(alloc.iter().zip(&sizes).all(|(a, s)| a <= s));
            }
        }
    }
}
