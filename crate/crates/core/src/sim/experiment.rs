//! Replication runners for the estimation and testing studies.

use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::generate::{generate, CovariateLaw};
use super::metrics::{armse, erp, rmse};
use crate::error::{Error, Result};
use crate::estimators::{csl_estimate, global_estimate, one_shot_distributed, EstimatorKind};
use crate::glm::{fit_mle, DataShard, GlmFamily, SolverConfig};
use crate::inference::{lrt_global, lrt_oneshot, lrt_subvector_onestep, Hypothesis, TestMethod, TestResult};
use crate::rng::child_seed;
use crate::runtime::{run_one_step_protocol, Master, SpawnedWorker, Worker, DEFAULT_TIMEOUT};
use crate::sharding::{make_plan, ShardingStrategy};

/// Largest tolerated share of failed replications per estimator.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransportKind {
    #[default]
    InProcess,
    /// Local TCP workers spawned per replication.
    Tcp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub family: GlmFamily,
    pub beta_true: Vec<f64>,
    pub n_total: usize,
    pub workers: usize,
    /// Pilot and one-step estimates are produced for every fraction.
    pub pilot_fractions: Vec<f64>,
    pub sharding: ShardingStrategy,
    pub estimators: Vec<EstimatorKind>,
    pub replications: usize,
    pub base_seed: u64,
    pub covariate_law: CovariateLaw,
    /// Run CSL even under non-random sharding.
    #[serde(default)]
    pub force_csl: bool,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub transport: TransportKind,
}

impl SimConfig {
    pub fn pilot_size(&self, fraction: f64) -> usize {
        // Guard against 0.1 * 10_000 landing a hair above an integer.
        ((fraction * self.n_total as f64) - 1e-9).ceil().max(0.0) as usize
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.beta_true.len();
        if d == 0 {
            return Err(Error::Config("beta_true: must be non-empty".into()));
        }
        if self.beta_true.iter().any(|b| !b.is_finite()) {
            return Err(Error::Config("beta_true: entries must be finite".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications: must be at least 1".into()));
        }
        if self.workers == 0 || self.workers > self.n_total {
            return Err(Error::Config(format!("workers: need 1 ≤ K ≤ N, got K={} N={}", self.workers, self.n_total)));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("estimators: none requested".into()));
        }
        let needs_pilot = self.estimators.iter().any(|e| matches!(e, EstimatorKind::Pilot | EstimatorKind::OneStep));
        if needs_pilot && self.pilot_fractions.is_empty() {
            return Err(Error::Config("pilot_fractions: required for pilot and one-step".into()));
        }
        for &p in &self.pilot_fractions {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Config(format!("pilot_fractions: {p} is outside (0, 1]")));
            }
            if self.pilot_size(p) < d {
                return Err(Error::Config(format!("pilot_fractions: {p} gives fewer than d={d} pilot rows")));
            }
        }
        self.solver.validate()
    }

    fn runs(&self, kind: EstimatorKind) -> bool {
        if kind == EstimatorKind::Csl && self.sharding != ShardingStrategy::Random && !self.force_csl {
            return false;
        }
        self.estimators.contains(&kind)
    }

    /// (estimator, pilot fraction) slots in report order.
    fn slots(&self) -> Vec<(EstimatorKind, Option<f64>)> {
        let mut out = Vec::new();
        for kind in EstimatorKind::ALL {
            if !self.runs(kind) {
                continue;
            }
            match kind {
                EstimatorKind::Pilot | EstimatorKind::OneStep => {
                    out.extend(self.pilot_fractions.iter().map(|&p| (kind, Some(p))))
                }
                _ => out.push((kind, None)),
            }
        }
        out
    }

    fn replication_seed(&self, b: usize) -> u64 {
        self.base_seed.wrapping_add(b as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateEntry {
    pub estimator: EstimatorKind,
    pub pilot_fraction: Option<f64>,
    pub beta: Option<Vec<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub replication: usize,
    pub seed: u64,
    pub entries: Vec<EstimateEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: EstimatorKind,
    pub pilot_fraction: Option<f64>,
    pub rmse: Vec<f64>,
    pub armse: f64,
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub config: SimConfig,
    pub summary: Vec<EstimatorSummary>,
    pub records: Vec<ReplicationRecord>,
    /// Not serialized so that reports are reproducible byte for byte.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl SimReport {
    pub fn get(&self, kind: EstimatorKind, pilot_fraction: Option<f64>) -> Option<&EstimatorSummary> {
        self.summary.iter().find(|s| s.estimator == kind && s.pilot_fraction == pilot_fraction)
    }

    pub fn armse(&self, kind: EstimatorKind, pilot_fraction: Option<f64>) -> Option<f64> {
        self.get(kind, pilot_fraction).map(|s| s.armse)
    }
}

/// Workers for one replication plus whatever keeps TCP workers alive.
struct Session {
    master: Master,
    _spawned: Vec<SpawnedWorker>,
}

fn open_session(family: GlmFamily, shards: Vec<DataShard>, transport: TransportKind) -> Result<Session> {
    match transport {
        TransportKind::InProcess => {
            Ok(Session { master: Master::in_process(family, shards)?.with_concurrency(false), _spawned: Vec::new() })
        }
        TransportKind::Tcp => {
            let spawned = shards
                .into_iter()
                .map(|s| SpawnedWorker::spawn(Worker::new(family, s), "127.0.0.1:0"))
                .collect::<std::io::Result<Vec<_>>>()
                .map_err(|e| Error::Experiment(format!("spawning local workers: {e}")))?;
            let addrs: Vec<String> = spawned.iter().map(|w| w.addr.to_string()).collect();
            Ok(Session { master: Master::connect(&addrs, DEFAULT_TIMEOUT)?, _spawned: spawned })
        }
    }
}

fn sharded(cfg: &SimConfig, beta: &[f64], seed: u64) -> Result<(DataShard, Vec<DataShard>)> {
    let data = generate(cfg.family, cfg.n_total, beta, cfg.covariate_law, seed)?;
    let plan = make_plan(cfg.sharding, &data, cfg.workers, seed)?;
    let shards = plan.split(&data)?;
    Ok((data, shards))
}

fn entry(estimator: EstimatorKind, pilot_fraction: Option<f64>, r: Result<Vec<f64>>) -> EstimateEntry {
    match r {
        Ok(beta) => EstimateEntry { estimator, pilot_fraction, beta: Some(beta), error: None },
        Err(e) => EstimateEntry { estimator, pilot_fraction, beta: None, error: Some(e.to_string()) },
    }
}

fn converged(r: crate::glm::EstimateResult) -> Result<Vec<f64>> {
    if r.converged {
        Ok(r.beta)
    } else {
        Err(Error::Experiment(format!("solver did not converge in {} iterations", r.iterations)))
    }
}

fn run_estimation_replication(cfg: &SimConfig, b: usize) -> Result<ReplicationRecord> {
    let seed = cfg.replication_seed(b);
    let (_, shards) = sharded(cfg, &cfg.beta_true, seed)?;
    let anchor = shards[0].clone();
    let mut session = open_session(cfg.family, shards, cfg.transport)?;
    let master = &mut session.master;
    let n_total = cfg.n_total as f64;
    let mut entries = Vec::new();

    if cfg.runs(EstimatorKind::Global) {
        entries.push(entry(EstimatorKind::Global, None, global_estimate(master, None, &cfg.solver).and_then(converged)));
    }
    let mut anchor_fit = None;
    if cfg.runs(EstimatorKind::OneShot) {
        let r = one_shot_distributed(master, &cfg.solver, false);
        if let Ok((_, locals)) = &r {
            anchor_fit = Some(locals[0].beta.clone());
        }
        entries.push(entry(EstimatorKind::OneShot, None, r.map(|(e, _)| e.beta)));
    }
    if cfg.runs(EstimatorKind::Csl) {
        let r = (|| {
            let anchor_beta = match anchor_fit.take() {
                Some(b) => b,
                None => converged(fit_mle(cfg.family, &anchor, &vec![0.0; anchor.dim()], &cfg.solver)?)?,
            };
            let g: Vec<f64> = master.aggregate(&anchor_beta)?.score.iter().map(|s| s / n_total).collect();
            converged(csl_estimate(cfg.family, &anchor, &anchor_beta, &g, &cfg.solver)?)
        })();
        entries.push(entry(EstimatorKind::Csl, None, r));
    }
    let (want_pilot, want_step) = (cfg.runs(EstimatorKind::Pilot), cfg.runs(EstimatorKind::OneStep));
    if want_pilot || want_step {
        for (i, &p) in cfg.pilot_fractions.iter().enumerate() {
            let r = run_one_step_protocol(master, cfg.family, cfg.pilot_size(p), child_seed(seed, i as u64), &cfg.solver)
                .and_then(|o| {
                    if o.pilot.converged {
                        Ok(o)
                    } else {
                        Err(Error::Experiment("pilot fit did not converge".into()))
                    }
                });
            let (pilot, step) = match r {
                Ok(o) => (Ok(o.pilot.beta), Ok(o.estimate.beta)),
                Err(e) => (Err(e.clone()), Err(e)),
            };
            if want_pilot {
                entries.push(entry(EstimatorKind::Pilot, Some(p), pilot));
            }
            if want_step {
                entries.push(entry(EstimatorKind::OneStep, Some(p), step));
            }
        }
    }
    Ok(ReplicationRecord { replication: b, seed, entries })
}

fn check_failures(label: &str, failures: usize, total: usize) -> Result<()> {
    if failures as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(Error::Experiment(format!(
            "{label}: {failures} of {total} replications failed (limit {:.0}%)",
            MAX_FAILURE_RATE * 100.0
        )));
    }
    if failures > 0 {
        warn!("{label}: {failures} of {total} replications failed and were excluded");
    }
    Ok(())
}

/// Runs `cfg.replications` seeded replications, in parallel, and summarizes
/// ARMSE per estimator and pilot fraction.
pub fn run_estimation_experiment(cfg: &SimConfig) -> Result<SimReport> {
    cfg.validate()?;
    let start = Instant::now();
    let records: Vec<ReplicationRecord> =
        (1..=cfg.replications).into_par_iter().map(|b| run_estimation_replication(cfg, b)).collect::<Result<_>>()?;
    let summary = summarize_estimates(cfg, &records)?;
    let wall_clock_secs = start.elapsed().as_secs_f64();
    info!("estimation experiment: {} replications in {wall_clock_secs:.1}s", cfg.replications);
    Ok(SimReport { config: cfg.clone(), summary, records, wall_clock_secs })
}

/// Recomputes the summary table from raw records.
pub fn summarize_estimates(cfg: &SimConfig, records: &[ReplicationRecord]) -> Result<Vec<EstimatorSummary>> {
    let mut summary = Vec::new();
    for (kind, p) in cfg.slots() {
        let mut ok = Vec::new();
        let mut failures = 0;
        for rec in records {
            match rec.entries.iter().find(|e| e.estimator == kind && e.pilot_fraction == p).and_then(|e| e.beta.clone()) {
                Some(b) => ok.push(b),
                None => failures += 1,
            }
        }
        let label = match p {
            Some(p) => format!("{} (p={p})", kind.label()),
            None => kind.label().to_string(),
        };
        check_failures(&label, failures, records.len())?;
        let r = rmse(&ok, &cfg.beta_true)?;
        summary.push(EstimatorSummary {
            estimator: kind,
            pilot_fraction: p,
            armse: armse(&r),
            rmse: r,
            successes: ok.len(),
            failures,
        });
    }
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LrtConfig {
    /// Data-generating settings; `beta_true` supplies the coordinates the
    /// hypothesis leaves free.
    pub sim: SimConfig,
    pub hypothesis: Hypothesis,
    /// Value of every restricted coordinate in the alternative pass.
    pub beta_alt: f64,
    pub methods: Vec<TestMethod>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    0.05
}

impl LrtConfig {
    pub fn null_beta(&self) -> Vec<f64> {
        self.hypothesis.apply(&self.sim.beta_true)
    }

    pub fn alt_beta(&self) -> Vec<f64> {
        let mut b = self.sim.beta_true.clone();
        for &(j, _) in self.hypothesis.restricted() {
            b[j] = self.beta_alt;
        }
        b
    }

    pub fn validate(&self) -> Result<()> {
        let mut sim = self.sim.clone();
        sim.estimators = vec![EstimatorKind::Global];
        sim.validate()?;
        self.hypothesis.validate(self.sim.beta_true.len()).map_err(|e| Error::Config(format!("hypothesis: {e}")))?;
        if self.methods.is_empty() {
            return Err(Error::Config("methods: none requested".into()));
        }
        let needs_pilot = self.methods.iter().any(|m| matches!(m, TestMethod::PilotLRT | TestMethod::OneStepLRT));
        if needs_pilot && self.sim.pilot_fractions.is_empty() {
            return Err(Error::Config("sim.pilot_fractions: required for pilot and one-step tests".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha: {} is outside (0, 1)", self.alpha)));
        }
        if !self.beta_alt.is_finite() {
            return Err(Error::Config("beta_alt: must be finite".into()));
        }
        Ok(())
    }

    fn slots(&self) -> Vec<(TestMethod, Option<f64>)> {
        let mut out = Vec::new();
        for m in TestMethod::ALL {
            if !self.methods.contains(&m) {
                continue;
            }
            match m {
                TestMethod::PilotLRT | TestMethod::OneStepLRT => {
                    out.extend(self.sim.pilot_fractions.iter().map(|&p| (m, Some(p))))
                }
                _ => out.push((m, None)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pass {
    Null,
    Alternative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestEntry {
    pub method: TestMethod,
    pub pilot_fraction: Option<f64>,
    pub result: Option<TestResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtRecord {
    pub replication: usize,
    pub pass: Pass,
    pub seed: u64,
    pub entries: Vec<TestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub method: TestMethod,
    pub pilot_fraction: Option<f64>,
    pub size: f64,
    pub power: f64,
    pub null_failures: usize,
    pub alt_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrtReport {
    pub config: LrtConfig,
    pub summary: Vec<TestSummary>,
    pub records: Vec<LrtRecord>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl LrtReport {
    pub fn get(&self, method: TestMethod, pilot_fraction: Option<f64>) -> Option<&TestSummary> {
        self.summary.iter().find(|s| s.method == method && s.pilot_fraction == pilot_fraction)
    }
}

fn test_entry(method: TestMethod, pilot_fraction: Option<f64>, r: Result<TestResult>) -> TestEntry {
    match r {
        Ok(t) => TestEntry { method, pilot_fraction, result: Some(t), error: None },
        Err(e) => TestEntry { method, pilot_fraction, result: None, error: Some(e.to_string()) },
    }
}

fn run_lrt_replication(cfg: &LrtConfig, b: usize, pass: Pass) -> Result<LrtRecord> {
    let sim = &cfg.sim;
    let base = sim.replication_seed(b);
    let (seed, beta) = match pass {
        Pass::Null => (base, cfg.null_beta()),
        Pass::Alternative => (child_seed(base, u64::from(u32::MAX)), cfg.alt_beta()),
    };
    let (_, shards) = sharded(sim, &beta, seed)?;
    let mut session = open_session(sim.family, shards, sim.transport)?;
    let master = &mut session.master;
    let mut entries = Vec::new();
    if cfg.methods.contains(&TestMethod::GlobalLRT) {
        let r = lrt_global(master, &cfg.hypothesis, &sim.solver).and_then(|(t, alt, null)| {
            if alt.converged && null.converged {
                Ok(t)
            } else {
                Err(Error::Experiment("global fit did not converge".into()))
            }
        });
        entries.push(test_entry(TestMethod::GlobalLRT, None, r));
    }
    if cfg.methods.contains(&TestMethod::OneShotLRT) {
        entries.push(test_entry(TestMethod::OneShotLRT, None, lrt_oneshot(master, &cfg.hypothesis, &sim.solver)));
    }
    let (want_pilot, want_step) =
        (cfg.methods.contains(&TestMethod::PilotLRT), cfg.methods.contains(&TestMethod::OneStepLRT));
    if want_pilot || want_step {
        for (i, &p) in sim.pilot_fractions.iter().enumerate() {
            let r = lrt_subvector_onestep(
                master,
                sim.family,
                &cfg.hypothesis,
                sim.pilot_size(p),
                child_seed(seed, i as u64),
                &sim.solver,
            );
            let (pilot, step) = match r {
                Ok(o) => (Ok(o.pilot), Ok(o.one_step)),
                Err(e) => (Err(e.clone()), Err(e)),
            };
            if want_pilot {
                entries.push(test_entry(TestMethod::PilotLRT, Some(p), pilot));
            }
            if want_step {
                entries.push(test_entry(TestMethod::OneStepLRT, Some(p), step));
            }
        }
    }
    Ok(LrtRecord { replication: b, pass, seed, entries })
}

/// Null pass for empirical size, alternative pass for empirical power.
pub fn run_lrt_experiment(cfg: &LrtConfig) -> Result<LrtReport> {
    cfg.validate()?;
    let start = Instant::now();
    let jobs: Vec<(usize, Pass)> = [Pass::Null, Pass::Alternative]
        .into_iter()
        .flat_map(|pass| (1..=cfg.sim.replications).map(move |b| (b, pass)))
        .collect();
    let records: Vec<LrtRecord> =
        jobs.into_par_iter().map(|(b, pass)| run_lrt_replication(cfg, b, pass)).collect::<Result<_>>()?;
    let summary = summarize_tests(cfg, &records)?;
    let wall_clock_secs = start.elapsed().as_secs_f64();
    info!("LRT experiment: {} replications per pass in {wall_clock_secs:.1}s", cfg.sim.replications);
    Ok(LrtReport { config: cfg.clone(), summary, records, wall_clock_secs })
}

pub fn summarize_tests(cfg: &LrtConfig, records: &[LrtRecord]) -> Result<Vec<TestSummary>> {
    let mut summary = Vec::new();
    for (method, p) in cfg.slots() {
        let mut rates = [0.0; 2];
        let mut fails = [0usize; 2];
        for (i, pass) in [Pass::Null, Pass::Alternative].into_iter().enumerate() {
            let recs: Vec<&LrtRecord> = records.iter().filter(|r| r.pass == pass).collect();
            let mut rejections = Vec::with_capacity(recs.len());
            for rec in &recs {
                match rec.entries.iter().find(|e| e.method == method && e.pilot_fraction == p).and_then(|e| e.result.as_ref()) {
                    Some(t) => rejections.push(t.rejects(cfg.alpha)),
                    None => fails[i] += 1,
                }
            }
            let label = format!("{} {:?}{}", method.label(), pass, p.map(|p| format!(" (p={p})")).unwrap_or_default());
            check_failures(&label, fails[i], recs.len())?;
            rates[i] = erp(&rejections)?;
        }
        summary.push(TestSummary {
            method,
            pilot_fraction: p,
            size: rates[0],
            power: rates[1],
            null_failures: fails[0],
            alt_failures: fails[1],
        });
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(sharding: ShardingStrategy) -> SimConfig {
        SimConfig {
            family: GlmFamily::Logistic,
            beta_true: vec![1.0, 2.0, 1.0],
            n_total: 2000,
            workers: 4,
            pilot_fractions: vec![0.1],
            sharding,
            estimators: EstimatorKind::ALL.to_vec(),
            replications: 6,
            base_seed: 42,
            covariate_law: CovariateLaw::StdNormal,
            force_csl: false,
            solver: SolverConfig::default(),
            transport: TransportKind::InProcess,
        }
    }

    #[test]
    fn reproducible_records() {
        let cfg = small(ShardingStrategy::Random);
        let a = run_estimation_experiment(&cfg).unwrap();
        let b = run_estimation_experiment(&cfg).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(a.records.len(), 6);
        assert_eq!(summarize_estimates(&cfg, &a.records).unwrap(), a.summary);
    }

    #[test]
    fn csl_skipped_when_nonrandom() {
        let r = run_estimation_experiment(&small(ShardingStrategy::CovariateSumOrdered)).unwrap();
        assert!(r.get(EstimatorKind::Csl, None).is_none());
        assert!(r.get(EstimatorKind::OneStep, Some(0.1)).is_some());
    }

    #[test]
    fn full_pilot_matches_global() {
        let mut cfg = small(ShardingStrategy::Random);
        cfg.replications = 1;
        cfg.pilot_fractions = vec![1.0];
        let r = run_estimation_experiment(&cfg).unwrap();
        let rec = &r.records[0];
        let get = |k| rec.entries.iter().find(|e| e.estimator == k).unwrap().beta.clone().unwrap();
        let (g, s) = (get(EstimatorKind::Global), get(EstimatorKind::OneStep));
        assert!(g.iter().zip(&s).all(|(a, b)| (a - b).abs() < 1e-7));
    }

    #[test]
    fn tcp_matches_in_process() {
        let mut cfg = small(ShardingStrategy::Random);
        cfg.replications = 2;
        let a = run_estimation_experiment(&cfg).unwrap();
        cfg.transport = TransportKind::Tcp;
        let b = run_estimation_experiment(&cfg).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn config_errors() {
        let mut cfg = small(ShardingStrategy::Random);
        cfg.replications = 0;
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = small(ShardingStrategy::Random);
        cfg.pilot_fractions = vec![0.0005];
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        assert_eq!(small(ShardingStrategy::Random).pilot_size(0.1), 200);
    }

    #[test]
    fn lrt_smoke() {
        let mut sim = small(ShardingStrategy::Random);
        sim.beta_true = vec![0.2, 0.0];
        sim.covariate_law = CovariateLaw::InterceptPlusUniform01;
        sim.replications = 4;
        let cfg = LrtConfig {
            sim,
            hypothesis: Hypothesis::new(vec![(1, 0.0)]).unwrap(),
            beta_alt: 0.5,
            methods: TestMethod::ALL.to_vec(),
            alpha: 0.05,
        };
        let r = run_lrt_experiment(&cfg).unwrap();
        assert_eq!(r.records.len(), 8);
        assert_eq!(r.summary.len(), 4);
        let os = r.records[0].entries.iter().find(|e| e.method == TestMethod::OneShotLRT).unwrap();
        assert_eq!(os.result.as_ref().unwrap().df, 4);
    }
}
