//! Experiment driver for the bptrack tracker: configuration, Monte Carlo
//! orchestration, CSV persistence, oracle checks and runtime sweeps.

pub mod bench;
pub mod config;
pub mod experiment;
pub mod fit;
pub mod io;
pub mod oracle;

use thiserror::Error;

pub use config::RunConfig;
pub use experiment::{aggregate, monte_carlo, simulate_run, time_average, track_run};
pub use io::{MospaRow, ResultRow};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data mismatch: {0}")]
    Data(String),
    #[error("oracle tolerance exceeded: {0}")]
    OracleTolerance(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error("tracker failure: {0}")]
    Tracker(String),
}

impl CliError {
    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Data(_) => 3,
            Self::OracleTolerance(_) => 4,
            Self::Io(_) | Self::Tracker(_) => 1,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e.to_string())
    }
}

impl From<bptrack::TrackerError> for CliError {
    fn from(e: bptrack::TrackerError) -> Self {
        match e {
            bptrack::TrackerError::SensorMismatch { .. } => Self::Data(e.to_string()),
            other => Self::Tracker(other.to_string()),
        }
    }
}
