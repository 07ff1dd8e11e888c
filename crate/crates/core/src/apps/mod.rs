//! Problem builders: distributed least squares, barycentric localization and
//! noise injection.

pub mod bary;
pub mod localization;
pub mod noise;
pub mod normal;

use thiserror::Error;

use crate::linalg::LinalgError;
use crate::network::{AgentId, NetworkError};
use crate::sim::SimError;
use crate::system::SystemError;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("row {owner} has a nonzero in column {column}, which is not a neighbor")]
    SparsityViolation { owner: AgentId, column: usize },
    #[error("agent {owner} has {available} usable neighbors, needs {required}")]
    InsufficientNeighbors {
        owner: AgentId,
        available: usize,
        required: usize,
    },
    #[error("agent {owner}: neighbor simplex is degenerate (condition number {condition:e})")]
    DegenerateGeometry { owner: AgentId, condition: f64 },
    #[error("network is disconnected")]
    Disconnected,
    #[error("localization system is singular")]
    SingularSystem,
    #[error("no valid scene after {attempts} attempts: {last}")]
    SceneRejected { attempts: usize, last: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("scene json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("scene io: {0}")]
    Io(#[from] std::io::Error),
}
