//! Experiment harness: a flat config format, a suite runner over seeded
//! trials, plot-ready CSV/JSON emission, and the acceptance gates.
//!
//! The CLI front end (`active-knn run <config> --out <dir>`) is a thin
//! wrapper over [`runner::run_suite`] and [`results::ResultsBundle::emit`].

pub mod config;
pub mod results;
pub mod runner;

pub use config::{parse_config_str, ConfigError, ExperimentConfig};
pub use results::{parse_trials_csv, ResultsBundle, TrialRow};
pub use runner::{evaluate_gates, run_suite, GateResult, Suite};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(#[from] config::ConfigError),

    #[error("results error: {0}")]
    Results(#[from] results::RecordError),

    #[error(transparent)]
    Core(#[from] active_knn::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("{0}")]
    Other(String),
}
