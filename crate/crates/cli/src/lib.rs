//! Experiment harness: builds a problem, runs the requested solvers on it and
//! writes traces, a comparison report and SVG plots.

pub mod config;
pub mod experiment;
pub mod plot;

use std::path::PathBuf;

use thiserror::Error;

pub use config::{ExperimentConfig, RawMatrix, Scenario, Settings, SolverKind};
pub use experiment::{run_experiment, ComparisonReport, ExperimentOutput, SolverReport};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("no usable network after {attempts} attempts: {last}")]
    DisconnectedNetwork { attempts: usize, last: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    App(#[from] dcg_core::apps::AppError),
    #[error(transparent)]
    Network(#[from] dcg_core::NetworkError),
    #[error(transparent)]
    System(#[from] dcg_core::SystemError),
    #[error(transparent)]
    Solver(#[from] dcg_core::SolverError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
