//! Distributed estimation and likelihood-ratio testing for canonical-link
//! GLMs with a pilot sample and a single Newton step.

pub mod cli;
pub mod error;
pub mod estimators;
pub mod glm;
pub mod inference;
pub mod linalg;
pub mod rng;
pub mod runtime;
pub mod sharding;
pub mod sim;

pub use error::{Error, Result};
pub use estimators::EstimatorKind;
