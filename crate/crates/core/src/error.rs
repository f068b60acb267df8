use thiserror::Error;

use crate::runtime::codec::CodecError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix is not positive definite (non-positive pivot at column {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("information matrix is singular at iteration {iteration}")]
    SingularInformation { iteration: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("pilot sample too small: {rows} rows for {dim} coefficients (at least {required} required)")]
    PilotTooSmall { rows: usize, dim: usize, required: usize },

    #[error("pilot allocation error: worker {worker} was allocated {requested} rows but holds {available}")]
    Allocation { worker: usize, requested: usize, available: usize },

    #[error("one-shot estimate unavailable: local fits failed on workers {workers:?}")]
    OneShotUnavailable { workers: Vec<usize> },

    #[error("aggregation failed at worker {worker}: {reason}")]
    Aggregation { worker: usize, reason: String },

    #[error("protocol error: {0}")]
    Protocol(#[from] CodecError),

    #[error("experiment failed: {0}")]
    Experiment(String),
}
