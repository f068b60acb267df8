use crate::glm::{DerivativeBundle, EstimateResult};

/// Master → worker request.
#[derive(Debug, Clone, PartialEq)]
pub enum WorkerRequest {
    /// Draw `n_k` rows by SRSWOR keyed by `seed` and ship them raw.
    PilotDraw { n_k: u32, seed: u64 },
    Derivatives { beta: Vec<f64> },
    LogLik { beta: Vec<f64> },
    /// Local maximum-likelihood fit, optionally holding the `fixed`
    /// coordinates at given values.
    LocalFit { init: Vec<f64>, tol: f64, max_iter: u32, fixed: Vec<(u32, f64)> },
    ShardInfo,
}

/// Worker → master response.
#[derive(Debug, Clone, PartialEq)]
pub enum WorkerResponse {
    PilotRows { row_ids: Vec<u64>, y: Vec<f64>, x: Vec<f64>, dim: u32 },
    Derivatives(DerivativeBundle),
    LogLik(f64),
    LocalFit(EstimateResult),
    ShardInfo { count: u64, dim: u32 },
    Error { code: u16, message: String },
}

/// Error codes carried by [`WorkerResponse::Error`].
pub mod error_code {
    pub const MALFORMED_REQUEST: u16 = 1;
    pub const DIMENSION_MISMATCH: u16 = 2;
    pub const SOLVER_FAILURE: u16 = 3;
    pub const SAMPLING_FAILURE: u16 = 4;
    pub const DOMAIN: u16 = 5;
    pub const PROTOCOL: u16 = 6;
}

impl WorkerRequest {
    pub fn name(&self) -> &'static str {
        match self {
            WorkerRequest::PilotDraw { .. } => "pilot-draw",
            WorkerRequest::Derivatives { .. } => "derivatives",
            WorkerRequest::LogLik { .. } => "log-lik",
            WorkerRequest::LocalFit { .. } => "local-fit",
            WorkerRequest::ShardInfo => "shard-info",
        }
    }
}

impl WorkerResponse {
    pub fn name(&self) -> &'static str {
        match self {
            WorkerResponse::PilotRows { .. } => "pilot-rows",
            WorkerResponse::Derivatives(_) => "derivatives",
            WorkerResponse::LogLik(_) => "log-lik",
            WorkerResponse::LocalFit(_) => "local-fit",
            WorkerResponse::ShardInfo { .. } => "shard-info",
            WorkerResponse::Error { .. } => "error",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Request(WorkerRequest),
    Response(WorkerResponse),
}
