//! Canonical-link GLM families, their likelihood derivatives, and the
//! maximum-likelihood solver.

mod derivatives;
mod family;
mod fit;
mod shard;

pub use derivatives::{derivatives, log_lik_kernel, DerivativeBundle};
pub(crate) use derivatives::derivatives_counting;
pub use family::{mean, variance_fn, GlmFamily, POISSON_ETA_CAP};
pub use fit::{fit_mle, fit_mle_restricted, EstimateResult, SolverConfig};
pub(crate) use fit::{fisher_scoring, fit_restricted_with};
pub use shard::DataShard;
