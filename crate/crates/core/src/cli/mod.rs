//! Command-line interface: simulation drivers, CSV estimation and testing,
//! the worker daemon, and data generation.

mod airline;
mod dataset;
mod estimate;
mod generate;
mod simulate;
mod worker;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

pub use dataset::{write_csv, CsvDataset, LoadedData, INTERCEPT};
pub use estimate::{EstimateOutput, TestOutput};
pub use simulate::{preset_cells, Preset, RunConfig, CONFIG_ENV};

use crate::glm::GlmFamily;

/// Failures surfaced by the binary, each with its own exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("experiment failed: {0}")]
    Experiment(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("worker communication failed: {0}")]
    Worker(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Experiment(_) => 3,
            CliError::Data(_) => 4,
            CliError::Numerical(_) => 5,
            CliError::Worker(_) => 6,
            CliError::Io(_) => 7,
        }
    }
}

impl From<crate::Error> for CliError {
    fn from(e: crate::Error) -> Self {
        use crate::Error as E;
        let msg = e.to_string();
        match e {
            E::Config(_) | E::Shape(_) | E::PilotTooSmall { .. } | E::Allocation { .. } => CliError::Config(msg),
            E::Domain(_) | E::NotPositiveDefinite { .. } | E::SingularInformation { .. } => CliError::Numerical(msg),
            E::OneShotUnavailable { .. } | E::Experiment(_) => CliError::Experiment(msg),
            E::Aggregation { .. } | E::Protocol(_) => CliError::Worker(msg),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "onestep-glm", version, about = "Distributed GLM estimation with a pilot sample and one Newton step")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a simulation preset or a JSON run configuration.
    Simulate(SimulateArgs),
    /// Fit a model to a CSV file or to remote workers.
    Estimate(EstimateArgs),
    /// Likelihood-ratio test of fixed coefficient values.
    Test(TestArgs),
    /// Serve one data shard over TCP until SIGTERM.
    Worker(WorkerArgs),
    /// Write a synthetic dataset as CSV.
    Generate(GenerateArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// table1 / table2 (estimation) or table3 / table4 (tests).
    #[arg(long)]
    pub preset: Option<Preset>,
    /// JSON run configuration; defaults to the path in $ONESTEP_GLM_CONFIG.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Must agree with the preset when given.
    #[arg(long, value_parser = ["estimation", "lrt"])]
    pub mode: Option<String>,
    /// Restrict a preset, e.g. `N=10000,K=5,p=0.10,sharding=random`.
    #[arg(long)]
    pub cell: Option<String>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Alternative slope for test presets, or `calibrate`.
    #[arg(long)]
    pub beta_alt: Option<String>,
    #[arg(long, value_parser = ["in-process", "tcp"])]
    pub transport: Option<String>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads for replications (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args, Clone)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub family: GlmFamily,
    #[arg(long, default_value = "y")]
    pub response: String,
    /// Comma-separated covariate columns (default: all but the response).
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    #[arg(long)]
    pub add_intercept: bool,
    /// Number of in-process shards.
    #[arg(long, default_value_t = 1)]
    pub shards: usize,
    /// random, nonrandom or contiguous.
    #[arg(long, default_value = "contiguous")]
    pub sharding: crate::sharding::ShardingStrategy,
    /// Remote workers `host:port,...`; replaces --data.
    #[arg(long, value_delimiter = ',')]
    pub workers: Vec<String>,
    #[arg(long, default_value_t = 0.2)]
    pub pilot_fraction: f64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iter: Option<u32>,
    /// Write the result as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// global, one-shot, one-step, csl or pilot.
    #[arg(long, default_value = "one-step")]
    pub method: crate::EstimatorKind,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// global, one-shot, one-step or pilot.
    #[arg(long, default_value = "one-step")]
    pub method: crate::EstimatorKind,
    /// `name=value`; repeat for several coefficients.
    #[arg(long = "fix", required = true)]
    pub fix: Vec<String>,
}

#[derive(Debug, Args)]
pub struct WorkerArgs {
    #[arg(long)]
    pub listen: String,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub family: GlmFamily,
    #[arg(long, default_value = "y")]
    pub response: String,
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    #[arg(long)]
    pub add_intercept: bool,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value = "logistic")]
    pub family: GlmFamily,
    #[arg(long, default_value_t = 10_000)]
    pub n: usize,
    /// Comma-separated coefficients.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1,2,1")]
    pub beta: Vec<f64>,
    /// std-normal, uniform01 or intercept-plus-uniform01.
    #[arg(long, default_value = "std-normal")]
    pub law: crate::sim::CovariateLaw,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Store rows in ascending order of their covariate sums.
    #[arg(long)]
    pub sort_by_covariate_sum: bool,
    /// Write a synthetic surrogate with the airline schema instead.
    #[arg(long)]
    pub synthetic_airline: bool,
    #[arg(long)]
    pub out: PathBuf,
}

/// Runs one parsed command.
pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => simulate::cmd_simulate(a),
        Command::Estimate(a) => estimate::cmd_estimate(a),
        Command::Test(a) => estimate::cmd_test(a),
        Command::Worker(a) => worker::cmd_worker(a),
        Command::Generate(a) => generate::cmd_generate(a),
    }
}
