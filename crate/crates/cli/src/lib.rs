//! Experiment runner for the distributed GAN intrusion-detection simulator.
//!
//! [`config`] resolves a flat `key = value` file plus flag overrides,
//! [`experiment`] trains the three detector families and writes traces,
//! weights, sweep tables and message logs per seed, [`report`] aggregates
//! sweep tables into `summary.md`, and [`theory_check`] compares trained
//! standalone value estimates with their closed-form predictions.

pub mod config;
pub mod experiment;
pub mod models;
pub mod report;
pub mod theory_check;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] dgids_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("report error: {0}")]
    Report(String),
}

impl CliError {
    /// 1 for configuration problems, 2 for everything that fails at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Core(dgids_core::Error::Config(_)) => 1,
            _ => 2,
        }
    }
}

pub use config::{parse_config, ExperimentConfig, Mode};
pub use experiment::{run_experiment, run_sweep, ExperimentOutcome};
