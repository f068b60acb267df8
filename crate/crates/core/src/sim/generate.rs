//! Synthetic data for the simulation study.

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{DataShard, GlmFamily};
use crate::rng::{stream_rng, StreamRng, DATA_STREAM};

/// Joint law of a covariate row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovariateLaw {
    /// Every entry i.i.d. N(0,1).
    StdNormal,
    /// Every entry i.i.d. U(0,1).
    Uniform01,
    /// First entry 1, the rest i.i.d. U(0,1).
    InterceptPlusUniform01,
}

impl std::str::FromStr for CovariateLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "std-normal" | "normal" => Ok(Self::StdNormal),
            "uniform01" | "uniform" => Ok(Self::Uniform01),
            "intercept-plus-uniform01" | "intercept-uniform" => Ok(Self::InterceptPlusUniform01),
            other => Err(Error::Config(format!("unknown covariate law '{other}'"))),
        }
    }
}

impl CovariateLaw {
    fn fill(self, rng: &mut StreamRng, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = match self {
                CovariateLaw::StdNormal => rng.sample(StandardNormal),
                CovariateLaw::Uniform01 => rng.random::<f64>(),
                CovariateLaw::InterceptPlusUniform01 if j == 0 => 1.0,
                CovariateLaw::InterceptPlusUniform01 => rng.random::<f64>(),
            };
        }
    }
}

/// Poisson variate: sequential inversion for λ ≤ 10, otherwise the
/// transformed-rejection sampler of `rand_distr`.
fn poisson_variate(rng: &mut StreamRng, lambda: f64) -> f64 {
    if lambda > 10.0 {
        return Poisson::new(lambda).expect("finite positive rate").sample(rng);
    }
    let u: f64 = rng.random();
    let mut k = 0u32;
    let mut p = (-lambda).exp();
    let mut cdf = p;
    // The tail beyond 200 has mass below 1e-200 for λ ≤ 10.
    while u > cdf && k < 200 {
        k += 1;
        p *= lambda / f64::from(k);
        cdf += p;
    }
    f64::from(k)
}

/// Draws `n` rows from the GLM with coefficients `beta`, deterministic in
/// `seed`. Row ids are `0..n`.
pub fn generate(family: GlmFamily, n: usize, beta: &[f64], law: CovariateLaw, seed: u64) -> Result<DataShard> {
    let d = beta.len();
    if d == 0 {
        return Err(Error::Shape("beta must be non-empty".into()));
    }
    if let Some(j) = beta.iter().position(|b| !b.is_finite()) {
        return Err(Error::Domain(format!("beta[{j}] is not finite")));
    }
    let mut rng = stream_rng(seed, DATA_STREAM);
    let mut x = vec![0.0; n * d];
    let mut y = Vec::with_capacity(n);
    for row in x.chunks_exact_mut(d) {
        law.fill(&mut rng, row);
        let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
        let mu = family.mean_capped(eta).0;
        y.push(match family {
            GlmFamily::Logistic => {
                if rng.random::<f64>() < mu {
                    1.0
                } else {
                    0.0
                }
            }
            GlmFamily::Poisson => poisson_variate(&mut rng, mu),
        });
    }
    DataShard::from_rows(y, x, d)
}

pub fn gen_logistic(n: usize, beta: &[f64], law: CovariateLaw, seed: u64) -> Result<DataShard> {
    generate(GlmFamily::Logistic, n, beta, law, seed)
}

pub fn gen_poisson(n: usize, beta: &[f64], law: CovariateLaw, seed: u64) -> Result<DataShard> {
    generate(GlmFamily::Poisson, n, beta, law, seed)
}
