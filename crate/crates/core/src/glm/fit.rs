use serde::{Deserialize, Serialize};

use super::derivatives::derivatives_counting;
use super::{DataShard, DerivativeBundle, GlmFamily};
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::inference::Hypothesis;
use crate::linalg::{chol_solve, inf_norm};

/// Newton / Fisher-scoring controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Convergence threshold on the infinity norm of the applied update.
    pub tol: f64,
    pub max_iter: u32,
    pub max_halvings: u32,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100, max_halvings: 30 }
    }
}

impl SolverConfig {
    pub fn new(tol: f64, max_iter: u32) -> Self {
        Self { tol, max_iter, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Config("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateResult {
    pub beta: Vec<f64>,
    /// Log-likelihood kernel at `beta`, when it has been evaluated.
    pub log_lik: Option<f64>,
    pub iterations: u32,
    pub converged: bool,
    pub final_step_norm: f64,
    pub method: Option<EstimatorKind>,
    /// Row evaluations that hit the Poisson linear-predictor cap.
    pub capped_evaluations: u64,
}

impl EstimateResult {
    pub(crate) fn tagged(mut self, kind: EstimatorKind) -> Self {
        self.method = Some(kind);
        self
    }
}

/// Fisher scoring driven by an arbitrary bundle evaluator. Each iteration
/// solves `info · step = score`, then halves the step while the
/// log-likelihood kernel decreases. The update is always evaluated in full,
/// so the bundle at the returned coefficients is the last one computed.
pub(crate) fn fisher_scoring<F>(init: &[f64], cfg: &SolverConfig, mut eval: F) -> Result<EstimateResult>
where
    F: FnMut(&[f64]) -> Result<DerivativeBundle>,
{
    cfg.validate()?;
    let mut beta = init.to_vec();
    let mut current = eval(&beta)?;
    if current.dim() != beta.len() {
        return Err(Error::Shape(format!(
            "evaluator returned d={} for a length-{} start",
            current.dim(),
            beta.len()
        )));
    }
    let mut result = EstimateResult {
        beta: Vec::new(),
        log_lik: None,
        iterations: 0,
        converged: false,
        final_step_norm: f64::INFINITY,
        method: None,
        capped_evaluations: 0,
    };
    if beta.is_empty() {
        result.converged = true;
        result.final_step_norm = 0.0;
        result.log_lik = Some(current.log_lik);
        result.beta = beta;
        return Ok(result);
    }

    for iteration in 1..=cfg.max_iter {
        result.iterations = iteration;
        let step = chol_solve(&current.info, &current.score).map_err(|e| match e {
            Error::NotPositiveDefinite { .. } => Error::SingularInformation { iteration: iteration as usize },
            other => other,
        })?;
        if step.iter().any(|s| !s.is_finite()) {
            return Err(Error::SingularInformation { iteration: iteration as usize });
        }

        let full_norm = inf_norm(&step);
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let candidate: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let next = eval(&candidate)?;
            let slack = 1e-13 * (1.0 + current.log_lik.abs());
            // Sub-tolerance steps are taken as-is: their log-likelihood change
            // is below rounding noise.
            if full_norm < cfg.tol || (next.log_lik.is_finite() && next.log_lik >= current.log_lik - slack) {
                accepted = Some((candidate, next));
                break;
            }
            scale *= 0.5;
        }

        let Some((candidate, next)) = accepted else {
            log::debug!("step halving exhausted at iteration {iteration}");
            result.final_step_norm = full_norm;
            break;
        };
        beta = candidate;
        current = next;
        result.final_step_norm = scale * full_norm;
        if result.final_step_norm < cfg.tol {
            result.converged = true;
            break;
        }
    }

    result.log_lik = Some(current.log_lik);
    result.beta = beta;
    Ok(result)
}

/// Maximum-likelihood fit on one in-memory shard.
pub fn fit_mle(family: GlmFamily, shard: &DataShard, init: &[f64], cfg: &SolverConfig) -> Result<EstimateResult> {
    if init.len() != shard.dim() {
        return Err(Error::Shape(format!("init has length {}, shard has d={}", init.len(), shard.dim())));
    }
    let mut capped = 0;
    let mut result = fisher_scoring(init, cfg, |beta| {
        let (b, c) = derivatives_counting(family, shard, beta)?;
        capped += c;
        Ok(b)
    })?;
    result.capped_evaluations = capped;
    Ok(result)
}

/// Maximum-likelihood fit with the hypothesis' coordinates held at their
/// fixed values. `init` is the full-length starting point; its fixed
/// coordinates are overwritten. The returned `beta` is full-length.
pub fn fit_mle_restricted(
    family: GlmFamily,
    shard: &DataShard,
    hypothesis: &Hypothesis,
    init: &[f64],
    cfg: &SolverConfig,
) -> Result<EstimateResult> {
    if init.len() != shard.dim() {
        return Err(Error::Shape(format!("init has length {}, shard has d={}", init.len(), shard.dim())));
    }
    let mut capped = 0;
    let mut result = fit_restricted_with(hypothesis, init, cfg, |beta| {
        let (b, c) = derivatives_counting(family, shard, beta)?;
        capped += c;
        Ok(b)
    })?;
    result.capped_evaluations = capped;
    Ok(result)
}

/// Runs Fisher scoring over the free coordinates of `hypothesis`, with `eval`
/// taking and returning full-dimension quantities.
pub(crate) fn fit_restricted_with<F>(
    hypothesis: &Hypothesis,
    init: &[f64],
    cfg: &SolverConfig,
    mut eval: F,
) -> Result<EstimateResult>
where
    F: FnMut(&[f64]) -> Result<DerivativeBundle>,
{
    let dim = init.len();
    hypothesis.validate(dim)?;
    let free = hypothesis.free_indices(dim);
    let free_init: Vec<f64> = free.iter().map(|&j| init[j]).collect();
    let mut result = fisher_scoring(&free_init, cfg, |free_beta| {
        let full = hypothesis.embed(free_beta, dim);
        Ok(eval(&full)?.restrict(&free))
    })?;
    result.beta = hypothesis.embed(&result.beta, dim);
    Ok(result)
}
