//! Likelihood-ratio tests and chi-square tail probabilities.

mod chi2;
mod hypothesis;
mod lrt;

pub use chi2::{chi2_critical, chi2_sf, ln_gamma, normal_cdf};
pub use hypothesis::Hypothesis;
pub use lrt::{
    lrt_full, lrt_global, lrt_oneshot, lrt_pilot, lrt_subvector_onestep, OneStepLrtOutcome, TestMethod, TestResult,
};
