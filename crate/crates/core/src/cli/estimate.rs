//! `estimate` and `test` on CSV data or remote workers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dataset::{CsvDataset, LoadedData};
use super::{CliError, DataArgs, EstimateArgs, TestArgs};
use crate::estimators::{
    csl_estimate, global_estimate, one_shot_distributed, pilot_estimate, EstimatorKind, PILOT_MIN_ROWS_PER_COEF,
};
use crate::glm::{fit_mle, DataShard, EstimateResult, SolverConfig};
use crate::inference::{lrt_global, lrt_oneshot, lrt_subvector_onestep, Hypothesis, TestResult};
use crate::linalg::spd_inverse;
use crate::rng::child_seed;
use crate::runtime::{run_one_step_protocol, Master, Transcript, DEFAULT_TIMEOUT};
use crate::sharding::{allocate_pilot, make_plan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub name: String,
    pub estimate: f64,
    /// From the full-data information at the estimate.
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub method: EstimatorKind,
    pub family: crate::glm::GlmFamily,
    pub coefficients: Vec<Coefficient>,
    /// Kernel log-likelihood over all rows (constants dropped).
    pub log_lik: f64,
    pub converged: bool,
    pub iterations: u32,
    /// Rounds used by the estimator, excluding the evaluation round.
    pub rounds: usize,
    pub heavy_rounds: usize,
    pub bytes: u64,
    pub pilot_rows: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestOutput {
    pub fixed: Vec<(String, f64)>,
    #[serde(flatten)]
    pub result: TestResult,
}

/// The session built from `DataArgs`: a master plus, when the data are local,
/// the shards (CSL needs the anchor shard).
struct Session {
    master: Master,
    shards: Option<Vec<DataShard>>,
    names: Vec<String>,
    n_total: usize,
}

fn solver(args: &DataArgs) -> Result<SolverConfig, CliError> {
    let mut cfg = SolverConfig::default();
    if let Some(t) = args.tol {
        cfg.tol = t;
    }
    if let Some(m) = args.max_iter {
        cfg.max_iter = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn open(args: &DataArgs) -> Result<Session, CliError> {
    if !(args.pilot_fraction > 0.0 && args.pilot_fraction <= 1.0) {
        return Err(CliError::Config(format!("--pilot-fraction {} is outside (0, 1]", args.pilot_fraction)));
    }
    if !args.workers.is_empty() {
        if args.data.is_some() {
            return Err(CliError::Config("--data and --workers are mutually exclusive".into()));
        }
        let mut master = Master::connect(&args.workers, DEFAULT_TIMEOUT)?;
        let sizes = master.shard_info()?;
        let d = master.dim()?;
        let mut names = Vec::new();
        if args.add_intercept {
            names.push(super::INTERCEPT.to_string());
        }
        names.extend(args.covariates.iter().cloned());
        if names.len() != d {
            names = (1..=d).map(|j| format!("b{j}")).collect();
        }
        return Ok(Session { master, shards: None, names, n_total: sizes.iter().sum() });
    }
    let path = args.data.as_deref().ok_or_else(|| CliError::Config("one of --data or --workers is required".into()))?;
    let LoadedData { shard, names } = dataset_spec(args).load(path, args.family)?;
    if args.shards == 0 || args.shards > shard.len() {
        return Err(CliError::Config(format!("--shards {} must lie in [1, {}]", args.shards, shard.len())));
    }
    let plan = make_plan(args.sharding, &shard, args.shards, args.seed)?;
    let shards = plan.split(&shard)?;
    let master = Master::in_process(args.family, shards.clone())?.with_concurrency(false);
    Ok(Session { master, shards: Some(shards), names, n_total: shard.len() })
}

fn dataset_spec(args: &DataArgs) -> CsvDataset {
    CsvDataset { response: args.response.clone(), covariates: args.covariates.clone(), add_intercept: args.add_intercept }
}

fn pilot_size(args: &DataArgs, n_total: usize) -> usize {
    ((args.pilot_fraction * n_total as f64) - 1e-9).ceil().max(1.0) as usize
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    println!("{text}");
    if let Some(p) = path {
        std::fs::write(p, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(())
}

fn estimate_with(s: &mut Session, method: EstimatorKind, args: &DataArgs, cfg: &SolverConfig) -> Result<(EstimateResult, Option<usize>), CliError> {
    let n = pilot_size(args, s.n_total);
    Ok(match method {
        EstimatorKind::Global => (global_estimate(&mut s.master, None, cfg)?, None),
        EstimatorKind::OneShot => (one_shot_distributed(&mut s.master, cfg, false)?.0, None),
        EstimatorKind::OneStep => (run_one_step_protocol(&mut s.master, args.family, n, args.seed, cfg)?.estimate, Some(n)),
        EstimatorKind::Pilot => {
            let sizes = s.master.shard_info()?;
            let alloc = allocate_pilot(&sizes, n)?;
            let seeds: Vec<u64> = (0..sizes.len()).map(|k| child_seed(args.seed, k as u64)).collect();
            let rows = s.master.pilot_draw(&alloc, &seeds)?;
            (pilot_estimate(args.family, &rows, cfg, PILOT_MIN_ROWS_PER_COEF)?, Some(n))
        }
        EstimatorKind::Csl => {
            let shards = s
                .shards
                .as_ref()
                .ok_or_else(|| CliError::Config("csl needs local data (--data), not --workers".into()))?;
            let anchor = &shards[0];
            let local = fit_mle(args.family, anchor, &vec![0.0; anchor.dim()], cfg)?;
            if !local.converged {
                return Err(CliError::Numerical("anchor local fit did not converge".into()));
            }
            let total = s.n_total as f64;
            let g: Vec<f64> = s.master.aggregate(&local.beta)?.score.iter().map(|v| v / total).collect();
            (csl_estimate(args.family, anchor, &local.beta, &g, cfg)?, None)
        }
    })
}

pub(super) fn cmd_estimate(a: EstimateArgs) -> Result<(), CliError> {
    let cfg = solver(&a.data)?;
    let mut s = open(&a.data)?;
    let mark = s.master.transcript().rounds.len();
    let (est, pilot_rows) = estimate_with(&mut s, a.method, &a.data, &cfg)?;
    let used: Transcript = s.master.transcript().since(mark);
    // One evaluation round gives both the log-likelihood and the information.
    let bundle = s.master.aggregate(&est.beta)?;
    let cov = spd_inverse(&bundle.info).map_err(|e| CliError::Numerical(format!("information at the estimate: {e}")))?;
    let coefficients = s
        .names
        .iter()
        .zip(&est.beta)
        .enumerate()
        .map(|(j, (name, b))| Coefficient { name: name.clone(), estimate: *b, std_error: cov[(j, j)].sqrt() })
        .collect();
    let out = EstimateOutput {
        method: a.method,
        family: a.data.family,
        coefficients,
        log_lik: bundle.log_lik,
        converged: est.converged,
        iterations: est.iterations,
        rounds: used.rounds.len(),
        heavy_rounds: used.heavy_rounds(),
        bytes: used.total_bytes(),
        pilot_rows,
    };
    write_json(a.data.out.as_deref(), &out)
}

/// Parses `name=value` pairs against the coefficient names.
fn parse_fixes(fix: &[String], names: &[String]) -> Result<(Hypothesis, Vec<(String, f64)>), CliError> {
    let mut pairs = Vec::new();
    let mut named = Vec::new();
    for f in fix {
        let (name, value) = f.split_once('=').ok_or_else(|| CliError::Config(format!("--fix '{f}' is not name=value")))?;
        let j = names
            .iter()
            .position(|n| n == name.trim())
            .ok_or_else(|| CliError::Config(format!("--fix: unknown coefficient '{}' (known: {})", name.trim(), names.join(", "))))?;
        let v: f64 = value.trim().parse().map_err(|_| CliError::Config(format!("--fix '{f}': value is not a number")))?;
        pairs.push((j, v));
        named.push((names[j].clone(), v));
    }
    let h = Hypothesis::new(pairs).map_err(|e| CliError::Config(format!("--fix: {e}")))?;
    Ok((h, named))
}

pub(super) fn cmd_test(a: TestArgs) -> Result<(), CliError> {
    let cfg = solver(&a.data)?;
    let mut s = open(&a.data)?;
    let (h, fixed) = parse_fixes(&a.fix, &s.names)?;
    let n = pilot_size(&a.data, s.n_total);
    let result = match a.method {
        EstimatorKind::Global => lrt_global(&mut s.master, &h, &cfg)?.0,
        EstimatorKind::OneShot => lrt_oneshot(&mut s.master, &h, &cfg)?,
        EstimatorKind::OneStep => lrt_subvector_onestep(&mut s.master, a.data.family, &h, n, a.data.seed, &cfg)?.one_step,
        EstimatorKind::Pilot => lrt_subvector_onestep(&mut s.master, a.data.family, &h, n, a.data.seed, &cfg)?.pilot,
        EstimatorKind::Csl => return Err(CliError::Config("no likelihood-ratio test is defined for csl".into())),
    };
    write_json(a.data.out.as_deref(), &TestOutput { fixed, result })
}
