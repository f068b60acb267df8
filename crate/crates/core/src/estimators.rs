//! The estimators compared by the simulation study: global MLE, pilot MLE,
//! one-step update, one-shot averaging, and the surrogate-likelihood (CSL)
//! baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{derivatives, fisher_scoring, fit_mle, fit_mle_restricted, DataShard, DerivativeBundle, EstimateResult, GlmFamily, SolverConfig};
use crate::inference::Hypothesis;
use crate::linalg::{chol_solve, inf_norm};
use crate::runtime::Master;

/// Pilot fits on fewer than this many rows per coefficient are refused.
pub const PILOT_MIN_ROWS_PER_COEF: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "GO")]
    Global,
    #[serde(rename = "OS")]
    OneShot,
    #[serde(rename = "CSL")]
    Csl,
    #[serde(rename = "Pilot")]
    Pilot,
    #[serde(rename = "One-Step")]
    OneStep,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] =
        [EstimatorKind::Global, EstimatorKind::OneShot, EstimatorKind::Csl, EstimatorKind::Pilot, EstimatorKind::OneStep];

    /// Column label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            EstimatorKind::Global => "GO",
            EstimatorKind::OneShot => "OS",
            EstimatorKind::Csl => "CSL",
            EstimatorKind::Pilot => "Pilot",
            EstimatorKind::OneStep => "One-Step",
        }
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "global" | "go" => Ok(EstimatorKind::Global),
            "one-shot" | "oneshot" | "os" => Ok(EstimatorKind::OneShot),
            "csl" => Ok(EstimatorKind::Csl),
            "pilot" => Ok(EstimatorKind::Pilot),
            "one-step" | "onestep" => Ok(EstimatorKind::OneStep),
            other => Err(Error::Config(format!("unknown estimator '{other}'"))),
        }
    }
}

fn check_pilot_size(rows: usize, dim: usize, min_rows_per_coef: usize) -> Result<()> {
    let required = min_rows_per_coef * dim;
    if rows < required || rows == 0 {
        return Err(Error::PilotTooSmall { rows, dim, required: required.max(1) });
    }
    Ok(())
}

/// Maximum-likelihood fit on the pooled pilot rows. Refuses pilots with
/// fewer than `min_rows_per_coef · d` rows.
pub fn pilot_estimate(
    family: GlmFamily,
    pilot_rows: &DataShard,
    cfg: &SolverConfig,
    min_rows_per_coef: usize,
) -> Result<EstimateResult> {
    check_pilot_size(pilot_rows.len(), pilot_rows.dim(), min_rows_per_coef)?;
    let init = vec![0.0; pilot_rows.dim()];
    Ok(fit_mle(family, pilot_rows, &init, cfg)?.tagged(EstimatorKind::Pilot))
}

/// Pilot fit under a null hypothesis; same size guard as [`pilot_estimate`].
pub fn pilot_estimate_restricted(
    family: GlmFamily,
    pilot_rows: &DataShard,
    hypothesis: &Hypothesis,
    init: &[f64],
    cfg: &SolverConfig,
    min_rows_per_coef: usize,
) -> Result<EstimateResult> {
    check_pilot_size(pilot_rows.len(), pilot_rows.dim(), min_rows_per_coef)?;
    Ok(fit_mle_restricted(family, pilot_rows, hypothesis, init, cfg)?.tagged(EstimatorKind::Pilot))
}

fn newton_step(info: &crate::linalg::Matrix, score: &[f64]) -> Result<Vec<f64>> {
    chol_solve(info, score).map_err(|e| match e {
        Error::NotPositiveDefinite { .. } => Error::SingularInformation { iteration: 1 },
        other => other,
    })
}

/// Single undamped Newton step from the pilot estimate using the full-data
/// bundle evaluated at it. The log-likelihood is left unset.
pub fn one_step_estimate(pilot_beta: &[f64], aggregate: &DerivativeBundle) -> Result<EstimateResult> {
    if pilot_beta.len() != aggregate.dim() {
        return Err(Error::Shape(format!(
            "pilot has length {}, aggregate has d={}",
            pilot_beta.len(),
            aggregate.dim()
        )));
    }
    let step = newton_step(&aggregate.info, &aggregate.score)?;
    Ok(EstimateResult {
        beta: pilot_beta.iter().zip(&step).map(|(b, s)| b + s).collect(),
        log_lik: None,
        iterations: 1,
        converged: true,
        final_step_norm: inf_norm(&step),
        method: Some(EstimatorKind::OneStep),
        capped_evaluations: 0,
    })
}

/// One-step update over the free coordinates of `hypothesis`: the restricted
/// rows and columns of the bundle (evaluated at the restricted pilot point)
/// are deleted before solving.
pub fn one_step_restricted(
    hypothesis: &Hypothesis,
    restricted_pilot: &[f64],
    aggregate: &DerivativeBundle,
) -> Result<EstimateResult> {
    let dim = restricted_pilot.len();
    hypothesis.validate(dim)?;
    let free = hypothesis.free_indices(dim);
    let start = hypothesis.apply(restricted_pilot);
    if free.is_empty() {
        return Ok(EstimateResult {
            beta: start,
            log_lik: None,
            iterations: 0,
            converged: true,
            final_step_norm: 0.0,
            method: Some(EstimatorKind::OneStep),
            capped_evaluations: 0,
        });
    }
    let sub = aggregate.restrict(&free);
    let step = newton_step(&sub.info, &sub.score)?;
    let mut beta = start;
    for (&j, s) in free.iter().zip(&step) {
        beta[j] += s;
    }
    Ok(EstimateResult {
        beta,
        log_lik: None,
        iterations: 1,
        converged: true,
        final_step_norm: inf_norm(&step),
        method: Some(EstimatorKind::OneStep),
        capped_evaluations: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OneShotWeights {
    Equal,
    /// Weight worker k by its row count.
    BySize(Vec<u64>),
}

/// Average of the local MLEs.
pub fn one_shot_estimate(local_fits: &[EstimateResult], weights: &OneShotWeights) -> Result<EstimateResult> {
    let first = local_fits.first().ok_or_else(|| Error::Config("no local fits to average".into()))?;
    let failed: Vec<usize> = local_fits.iter().enumerate().filter(|(_, f)| !f.converged).map(|(k, _)| k).collect();
    if !failed.is_empty() {
        return Err(Error::OneShotUnavailable { workers: failed });
    }
    let d = first.beta.len();
    if let Some(k) = local_fits.iter().position(|f| f.beta.len() != d) {
        return Err(Error::Shape(format!("local fit {k} has length {}, expected {d}", local_fits[k].beta.len())));
    }
    let w: Vec<f64> = match weights {
        OneShotWeights::Equal => vec![1.0; local_fits.len()],
        OneShotWeights::BySize(sizes) => {
            if sizes.len() != local_fits.len() {
                return Err(Error::Shape(format!("{} sizes for {} local fits", sizes.len(), local_fits.len())));
            }
            sizes.iter().map(|&s| s as f64).collect()
        }
    };
    let total: f64 = w.iter().sum();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::Config("one-shot weights sum to zero".into()));
    }
    let mut beta = vec![0.0; d];
    for (fit, wk) in local_fits.iter().zip(&w) {
        for (b, v) in beta.iter_mut().zip(&fit.beta) {
            *b += wk * v;
        }
    }
    beta.iter_mut().for_each(|b| *b /= total);
    Ok(EstimateResult {
        beta,
        log_lik: None,
        iterations: 0,
        converged: true,
        final_step_norm: 0.0,
        method: Some(EstimatorKind::OneShot),
        capped_evaluations: local_fits.iter().map(|f| f.capped_evaluations).sum(),
    })
}

/// Surrogate-likelihood estimate: maximizes
/// `ℓ₁(β)/N₁ − (ℓ̇₁(β̄)/N₁ − ḡ)ᵀβ` on the anchor shard, where `β̄` is the
/// anchor's local MLE and `ḡ` the full-data score at `β̄` divided by N.
pub fn csl_estimate(
    family: GlmFamily,
    anchor_shard: &DataShard,
    anchor_beta: &[f64],
    global_grad_per_row: &[f64],
    cfg: &SolverConfig,
) -> Result<EstimateResult> {
    let d = anchor_shard.dim();
    if anchor_beta.len() != d || global_grad_per_row.len() != d {
        return Err(Error::Shape(format!("CSL inputs must have length d={d}")));
    }
    if anchor_shard.is_empty() {
        return Err(Error::Config("CSL anchor shard is empty".into()));
    }
    let n1 = anchor_shard.len() as f64;
    let local = derivatives(family, anchor_shard, anchor_beta)?;
    let shift: Vec<f64> = local.score.iter().zip(global_grad_per_row).map(|(s, g)| s / n1 - g).collect();
    let mut capped = 0;
    let mut result = fisher_scoring(anchor_beta, cfg, |beta| {
        let (mut b, c) = crate::glm::derivatives_counting(family, anchor_shard, beta)?;
        capped += c;
        b.info.scale(1.0 / n1);
        for (s, c) in b.score.iter_mut().zip(&shift) {
            *s = *s / n1 - c;
        }
        b.log_lik = b.log_lik / n1 - shift.iter().zip(beta).map(|(c, x)| c * x).sum::<f64>();
        Ok(b)
    })?;
    result.capped_evaluations = capped;
    // The surrogate objective is not a log-likelihood.
    result.log_lik = None;
    Ok(result.tagged(EstimatorKind::Csl))
}

/// Fisher scoring where every evaluation is one broadcast/aggregate round.
pub fn global_estimate(master: &mut Master, init: Option<&[f64]>, cfg: &SolverConfig) -> Result<EstimateResult> {
    let d = master.dim()?;
    let zeros = vec![0.0; d];
    let init = init.unwrap_or(&zeros);
    if init.len() != d {
        return Err(Error::Shape(format!("init has length {}, session has d={d}", init.len())));
    }
    Ok(fisher_scoring(init, cfg, |beta| master.aggregate(beta))?.tagged(EstimatorKind::Global))
}

/// Global MLE under a null hypothesis, by distributed Fisher scoring on the
/// free coordinates.
pub fn global_estimate_restricted(
    master: &mut Master,
    hypothesis: &Hypothesis,
    init: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<EstimateResult> {
    let d = master.dim()?;
    let zeros = vec![0.0; d];
    let init = init.unwrap_or(&zeros);
    Ok(crate::glm::fit_restricted_with(hypothesis, init, cfg, |beta| master.aggregate(beta))?
        .tagged(EstimatorKind::Global))
}

/// Local fits on every worker (one round), averaged.
pub fn one_shot_distributed(
    master: &mut Master,
    cfg: &SolverConfig,
    weights_by_size: bool,
) -> Result<(EstimateResult, Vec<EstimateResult>)> {
    let d = master.dim()?;
    let sizes = if weights_by_size { Some(master.shard_info()?) } else { None };
    let fits = master.local_fits(&vec![0.0; d], cfg, &[None])?;
    let mut local = Vec::with_capacity(fits.len());
    let mut failed = Vec::new();
    for (k, mut f) in fits.into_iter().enumerate() {
        match f.remove(0) {
            Ok(fit) if fit.converged => local.push(fit),
            Ok(fit) => {
                failed.push(k);
                local.push(fit);
            }
            Err(_) => failed.push(k),
        }
    }
    if !failed.is_empty() {
        return Err(Error::OneShotUnavailable { workers: failed });
    }
    let weights = match sizes {
        Some(s) => OneShotWeights::BySize(s.into_iter().map(|v| v as u64).collect()),
        None => OneShotWeights::Equal,
    };
    Ok((one_shot_estimate(&local, &weights)?, local))
}
