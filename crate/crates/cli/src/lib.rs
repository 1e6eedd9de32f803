//! Experiment driver: config parsing, solver wiring, CSV traces, JSON run
//! summaries and golden-trace checks.

pub mod config;
pub mod experiment;
pub mod format;
pub mod golden;

use std::path::PathBuf;

pub use config::{parse_config, parse_str, ConfigError, Experiment, ExperimentConfig};
pub use experiment::{run_experiment, RunSummary, SolverSummary};
pub use golden::{verify_golden, Divergence, VerifyReport};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("missing golden trace {0}")]
    MissingGolden(PathBuf),
    #[error(transparent)]
    Problem(#[from] rhm_core::Error),
}
