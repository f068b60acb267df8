//! The two-round one-step protocol.

use serde::{Deserialize, Serialize};

use super::master::{Master, Transcript};
use crate::error::Result;
use crate::estimators::{one_step_estimate, pilot_estimate, PILOT_MIN_ROWS_PER_COEF};
use crate::glm::{DataShard, DerivativeBundle, EstimateResult, GlmFamily, SolverConfig};
use crate::rng::child_seed;
use crate::sharding::allocate_pilot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepOutcome {
    pub estimate: EstimateResult,
    pub pilot: EstimateResult,
    #[serde(skip)]
    pub pilot_rows: Option<DataShard>,
    /// Full-data bundle at the pilot estimate.
    pub aggregate: DerivativeBundle,
    pub transcript: Transcript,
}

/// Shard sizes (metadata round), then
/// 1. stratified pilot draw pooled on the master and fit there;
/// 2. full-data derivatives at the pilot estimate and one Newton step.
pub fn run_one_step_protocol(
    master: &mut Master,
    family: GlmFamily,
    n: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<OneStepOutcome> {
    let mark = master.transcript().rounds.len();
    let sizes = master.shard_info()?;
    let alloc = allocate_pilot(&sizes, n)?;
    let seeds: Vec<u64> = (0..sizes.len()).map(|k| child_seed(seed, k as u64)).collect();
    let pilot_rows = master.pilot_draw(&alloc, &seeds)?;
    let pilot = pilot_estimate(family, &pilot_rows, cfg, PILOT_MIN_ROWS_PER_COEF)?;
    let aggregate = master.aggregate(&pilot.beta)?;
    let estimate = one_step_estimate(&pilot.beta, &aggregate)?;
    Ok(OneStepOutcome {
        estimate,
        pilot,
        pilot_rows: Some(pilot_rows),
        aggregate,
        transcript: master.transcript().since(mark),
    })
}
