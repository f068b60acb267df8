//! Simulation study: data generators, replication runners, metrics and
//! report writers.

mod calibrate;
mod experiment;
mod generate;
mod metrics;
mod report;

pub use calibrate::{calibrate_beta_alt, power_one_df, slope_efficient_information};
pub use experiment::{
    run_estimation_experiment, run_lrt_experiment, summarize_estimates, summarize_tests, EstimateEntry, EstimatorSummary,
    LrtConfig, LrtRecord, LrtReport, Pass, ReplicationRecord, SimConfig, SimReport, TestEntry, TestSummary,
    TransportKind, MAX_FAILURE_RATE,
};
pub use generate::{gen_logistic, gen_poisson, generate, CovariateLaw};
pub use metrics::{armse, erp, rmse};
pub use report::{estimation_csv, lrt_csv, write_estimation_report, write_lrt_report};
