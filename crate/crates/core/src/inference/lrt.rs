use serde::{Deserialize, Serialize};

use super::chi2::chi2_sf;
use super::hypothesis::Hypothesis;
use crate::error::{Error, Result};
use crate::estimators::{
    global_estimate, global_estimate_restricted, one_step_restricted, pilot_estimate_restricted, PILOT_MIN_ROWS_PER_COEF,
};
use crate::glm::{EstimateResult, GlmFamily, SolverConfig};
use crate::runtime::{run_one_step_protocol, Master, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TestMethod {
    GlobalLRT,
    OneStepLRT,
    PilotLRT,
    OneShotLRT,
}

impl TestMethod {
    pub const ALL: [TestMethod; 4] = [TestMethod::GlobalLRT, TestMethod::OneStepLRT, TestMethod::PilotLRT, TestMethod::OneShotLRT];

    pub fn label(self) -> &'static str {
        match self {
            TestMethod::GlobalLRT => "GO",
            TestMethod::OneStepLRT => "One-Step",
            TestMethod::PilotLRT => "Pilot",
            TestMethod::OneShotLRT => "OS",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: u32,
    pub p_value: f64,
    pub method: TestMethod,
    pub clamped: bool,
}

impl TestResult {
    /// Builds a result from a raw statistic, clamping negatives to zero.
    pub fn from_raw(raw: f64, df: u32, method: TestMethod) -> Result<Self> {
        if !raw.is_finite() {
            return Err(Error::Domain(format!("non-finite LRT statistic {raw}")));
        }
        if df == 0 {
            return Err(Error::Config("LRT needs df ≥ 1".into()));
        }
        let clamped = raw < 0.0;
        let statistic = raw.max(0.0);
        Ok(TestResult { statistic, df, p_value: chi2_sf(statistic, df)?, method, clamped })
    }

    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

fn df_of(n: usize) -> Result<u32> {
    u32::try_from(n).map_err(|_| Error::Config(format!("df {n} out of range")))
}

/// Full-vector test of `β = beta_null` from log-likelihood kernels evaluated
/// over the same rows.
pub fn lrt_full(
    beta_null: &[f64],
    beta_hat: &EstimateResult,
    loglik_at_null: f64,
    loglik_at_hat: f64,
    method: TestMethod,
) -> Result<TestResult> {
    if beta_null.len() != beta_hat.beta.len() {
        return Err(Error::Shape(format!(
            "null has length {}, estimate has length {}",
            beta_null.len(),
            beta_hat.beta.len()
        )));
    }
    TestResult::from_raw(2.0 * (loglik_at_hat - loglik_at_null), df_of(beta_null.len())?, method)
}

/// Everything produced by one run of the one-step subvector test. The pilot
/// test reuses the same pilot sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneStepLrtOutcome {
    pub one_step: TestResult,
    pub pilot: TestResult,
    pub unrestricted: EstimateResult,
    pub restricted: EstimateResult,
    pub transcript: Transcript,
}

/// One-step LRT of `hypothesis`. Rounds: metadata, pilot draw, derivatives at
/// the unrestricted pilot, derivatives at the restricted pilot (skipped when
/// every coordinate is fixed), and one log-likelihood broadcast for both
/// estimates.
pub fn lrt_subvector_onestep(
    master: &mut Master,
    family: GlmFamily,
    hypothesis: &Hypothesis,
    n: usize,
    seed: u64,
    cfg: &SolverConfig,
) -> Result<OneStepLrtOutcome> {
    let mark = master.transcript().rounds.len();
    let d = master.dim()?;
    hypothesis.validate(d)?;
    let df = df_of(hypothesis.s())?;
    let out = run_one_step_protocol(master, family, n, seed, cfg)?;
    let pilot_rows = out.pilot_rows.as_ref().expect("protocol returns pilot rows");

    let restricted_pilot = pilot_estimate_restricted(
        family,
        pilot_rows,
        hypothesis,
        &hypothesis.apply(&out.pilot.beta),
        cfg,
        PILOT_MIN_ROWS_PER_COEF,
    )?;
    let restricted = if hypothesis.is_full(d) {
        one_step_restricted(hypothesis, &restricted_pilot.beta, &crate::glm::DerivativeBundle::zeros(d))?
    } else {
        let agg = master.aggregate(&restricted_pilot.beta)?;
        one_step_restricted(hypothesis, &restricted_pilot.beta, &agg)?
    };

    let lls = master.log_liks(&[out.estimate.beta.clone(), restricted.beta.clone()])?;
    let mut unrestricted = out.estimate;
    unrestricted.log_lik = Some(lls[0]);
    let mut restricted = restricted;
    restricted.log_lik = Some(lls[1]);

    let one_step = TestResult::from_raw(2.0 * (lls[0] - lls[1]), df, TestMethod::OneStepLRT)?;
    let pilot = lrt_pilot(&out.pilot, &restricted_pilot, hypothesis)?;
    Ok(OneStepLrtOutcome { one_step, pilot, unrestricted, restricted, transcript: master.transcript().since(mark) })
}

/// Test on the pilot sample alone, from its unrestricted and restricted fits.
pub fn lrt_pilot(unrestricted: &EstimateResult, restricted: &EstimateResult, hypothesis: &Hypothesis) -> Result<TestResult> {
    let (Some(l1), Some(l0)) = (unrestricted.log_lik, restricted.log_lik) else {
        return Err(Error::Config("pilot fits carry no log-likelihood".into()));
    };
    TestResult::from_raw(2.0 * (l1 - l0), df_of(hypothesis.s())?, TestMethod::PilotLRT)
}

/// Test from the distributed global MLE and the distributed restricted MLE.
/// Returns the test and both fits.
pub fn lrt_global(
    master: &mut Master,
    hypothesis: &Hypothesis,
    cfg: &SolverConfig,
) -> Result<(TestResult, EstimateResult, EstimateResult)> {
    let d = master.dim()?;
    hypothesis.validate(d)?;
    let alt = global_estimate(master, None, cfg)?;
    let null = global_estimate_restricted(master, hypothesis, Some(&hypothesis.apply(&alt.beta)), cfg)?;
    let (Some(l1), Some(l0)) = (alt.log_lik, null.log_lik) else {
        return Err(Error::Config("global fits carry no log-likelihood".into()));
    };
    let t = TestResult::from_raw(2.0 * (l1 - l0), df_of(hypothesis.s())?, TestMethod::GlobalLRT)?;
    Ok((t, alt, null))
}

/// Sum over workers of local LRT statistics, with df = K·s. One round.
pub fn lrt_oneshot(master: &mut Master, hypothesis: &Hypothesis, cfg: &SolverConfig) -> Result<TestResult> {
    let d = master.dim()?;
    hypothesis.validate(d)?;
    let fits = master.local_fits(&vec![0.0; d], cfg, &[None, Some(hypothesis)])?;
    let k = fits.len();
    let mut failed = Vec::new();
    let mut raw = 0.0;
    for (w, pair) in fits.into_iter().enumerate() {
        match (&pair[0], &pair[1]) {
            (Ok(a), Ok(n)) if a.converged && n.converged => match (a.log_lik, n.log_lik) {
                (Some(la), Some(ln)) => raw += 2.0 * (la - ln),
                _ => failed.push(w),
            },
            _ => failed.push(w),
        }
    }
    if !failed.is_empty() {
        return Err(Error::OneShotUnavailable { workers: failed });
    }
    TestResult::from_raw(raw, df_of(k * hypothesis.s())?, TestMethod::OneShotLRT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::DataShard;

    fn est(beta: Vec<f64>) -> EstimateResult {
        EstimateResult {
            beta,
            log_lik: None,
            iterations: 1,
            converged: true,
            final_step_norm: 0.0,
            method: None,
            capped_evaluations: 0,
        }
    }

    #[test]
    fn identical_models() {
        let t = lrt_full(&[0.1, 0.2], &est(vec![0.1, 0.2]), -3.0, -3.0, TestMethod::GlobalLRT).unwrap();
        assert_eq!((t.statistic, t.p_value, t.df, t.clamped), (0.0, 1.0, 2, false));
    }

    #[test]
    fn negative_raw_is_clamped() {
        let t = lrt_full(&[0.0], &est(vec![0.1]), -3.0, -3.1, TestMethod::OneStepLRT).unwrap();
        assert!(t.clamped);
        assert_eq!((t.statistic, t.p_value), (0.0, 1.0));
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(
            lrt_full(&[0.0], &est(vec![0.0, 0.0]), 0.0, 0.0, TestMethod::GlobalLRT),
            Err(Error::Shape(_))
        ));
    }

    fn split(s: &DataShard, k: usize) -> Vec<DataShard> {
        crate::sharding::shard_contiguous(s.len(), k).unwrap().split(s).unwrap()
    }

    fn shard(seed: u64, n: usize) -> DataShard {
        crate::sim::gen_logistic(n, &[0.2, 0.0], crate::sim::CovariateLaw::InterceptPlusUniform01, seed).unwrap()
    }

    #[test]
    fn oneshot_identical_shards_zero_statistic() {
        // Null value set to the local MLE's own coordinate: both fits coincide.
        let s = shard(3, 400);
        let cfg = SolverConfig::default();
        let mle = crate::glm::fit_mle(GlmFamily::Logistic, &s, &[0.0, 0.0], &cfg).unwrap();
        let h = Hypothesis::new(vec![(1, mle.beta[1])]).unwrap();
        let mut m = Master::in_process(GlmFamily::Logistic, vec![s.clone(), s]).unwrap();
        let t = lrt_oneshot(&mut m, &h, &cfg).unwrap();
        assert!(t.statistic < 1e-9);
        assert_eq!(t.df, 2);
    }

    #[test]
    fn full_subvector_matches_lrt_full() {
        let s = shard(5, 2000);
        let cfg = SolverConfig::default();
        let null = vec![0.2, 0.0];
        let h = Hypothesis::full(&null).unwrap();
        let mut m = Master::in_process(GlmFamily::Logistic, split(&s, 2)).unwrap();
        let out = lrt_subvector_onestep(&mut m, GlmFamily::Logistic, &h, 400, 11, &cfg).unwrap();
        let l_hat = crate::glm::log_lik_kernel(GlmFamily::Logistic, &s, &out.unrestricted.beta).unwrap();
        let l_null = crate::glm::log_lik_kernel(GlmFamily::Logistic, &s, &null).unwrap();
        let full = lrt_full(&null, &out.unrestricted, l_null, l_hat, TestMethod::OneStepLRT).unwrap();
        assert!((full.statistic - out.one_step.statistic).abs() < 1e-9);
        assert_eq!(full.df, out.one_step.df);
        assert_eq!(out.restricted.beta, null);
    }

    #[test]
    fn self_test_statistic_near_zero() {
        let s = shard(8, 2000);
        let cfg = SolverConfig::default();
        let mut m = Master::in_process(GlmFamily::Logistic, split(&s, 4)).unwrap();
        let plain = run_one_step_protocol(&mut m, GlmFamily::Logistic, 400, 2, &cfg).unwrap();
        let h = Hypothesis::full(&plain.estimate.beta).unwrap();
        let out = lrt_subvector_onestep(&mut m, GlmFamily::Logistic, &h, 400, 2, &cfg).unwrap();
        assert!(out.one_step.statistic < 1e-9);
    }

    #[test]
    fn global_lrt_rounds_and_sign() {
        let s = shard(13, 3000);
        let cfg = SolverConfig::default();
        let mut m = Master::in_process(GlmFamily::Logistic, split(&s, 3)).unwrap();
        let h = Hypothesis::new(vec![(1, 0.0)]).unwrap();
        let (t, alt, null) = lrt_global(&mut m, &h, &cfg).unwrap();
        assert!(!t.clamped);
        assert_eq!(null.beta[1], 0.0);
        assert!(alt.converged && null.converged);
    }
}
