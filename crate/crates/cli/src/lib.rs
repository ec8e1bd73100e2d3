//! Experiment runner: MLMC studies, cost sweeps, graded-mesh analysis and
//! convergence checks, written as CSV with optional SVG plots.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::PathBuf;

pub use config::{BiasChoice, Experiment, ExperimentConfig, IntegratorChoice};
pub use experiments::{run_experiment, run_mlmc_experiment, Outcome, RunSummary};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] lts_mlmc::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    /// 2 for bad configuration, 3 for numerical failure, 1 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Core(lts_mlmc::Error::InvalidInput(_)) => 2,
            CliError::Core(_) => 3,
            CliError::Io { .. } => 1,
        }
    }
}
