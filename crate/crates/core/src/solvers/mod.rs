//! Agent behaviors: distributed conjugate gradient and stationary baselines.

mod baseline;
mod dcg;
mod sync;

pub use baseline::{
    default_richardson_omega, gauss_seidel_agents, jacobi_agents, richardson_agents, run_stationary, StationaryAgent,
    StationaryRule, StationaryRun, DIVERGENCE_LIMIT,
};
pub use dcg::{
    check_residual, curvature_component, dcg_agents, residual_component, run_dcg, step_size, update_direction, DcgAgent,
    DcgRun, IterationRecord, Phase,
};
pub use sync::{synchronize_vector, SyncAgent, VectorSync};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{AgentId, NetworkError};
use crate::system::{rhs_norm_sq, RowSlice, SystemError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("inconsistent share at index {index}: kept {kept}, incoming {incoming}")]
    InconsistentShare { index: usize, kept: f64, incoming: f64 },
    #[error("vector length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("synchronized vector incomplete: index {index} unknown")]
    Incomplete { index: usize },
    #[error("no estimate received for agent {0}")]
    MissingNeighborState(AgentId),
    #[error("previous residual is exactly zero")]
    ZeroPrevResidual,
    #[error("zero curvature along the search direction (d^T A d = {0:e})")]
    ZeroCurvature(f64),
    #[error("zero diagonal entry in row {0}")]
    ZeroDiagonal(AgentId),
    #[error("estimate norm {0:e} exceeds the divergence limit")]
    DivergenceDetected(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

/// How many vectors DCG synchronizes per outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcgMode {
    /// Reuses the previous iteration's residual vector (three syncs).
    #[default]
    Cached,
    /// Re-synchronizes the previous residual every iteration (four syncs).
    Strict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Threshold on the squared residual; `None` means `1e-10 * (1 + |b|^2)`.
    pub epsilon: Option<f64>,
    /// Outer-iteration cap; `None` means `10 n`.
    pub t_max: Option<usize>,
    /// Synchronization horizon; `None` uses the exact hop diameter.
    pub h_override: Option<usize>,
    /// Richardson relaxation factor.
    pub omega: Option<f64>,
    pub mode: DcgMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            epsilon: None,
            t_max: None,
            h_override: None,
            omega: None,
            mode: DcgMode::Cached,
        }
    }
}

impl SolverConfig {
    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = Some(epsilon);
        self
    }

    pub fn with_t_max(mut self, t_max: usize) -> Self {
        self.t_max = Some(t_max);
        self
    }

    pub fn with_horizon(mut self, h: usize) -> Self {
        self.h_override = Some(h);
        self
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = Some(omega);
        self
    }

    pub fn with_mode(mut self, mode: DcgMode) -> Self {
        self.mode = mode;
        self
    }

    /// Residual threshold for `rows`.
    pub fn resolved_epsilon(&self, rows: &[RowSlice]) -> Result<f64, SolverError> {
        let eps = self.epsilon.unwrap_or_else(|| default_epsilon(rows));
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(SolverError::InvalidConfig(format!("epsilon must be positive, got {eps}")));
        }
        Ok(eps)
    }

    pub fn resolved_t_max(&self, n: usize) -> Result<usize, SolverError> {
        let t_max = self.t_max.unwrap_or(10 * n.max(1));
        if t_max == 0 {
            return Err(SolverError::InvalidConfig("t_max must be at least 1".into()));
        }
        Ok(t_max)
    }
}

/// `1e-10 * (1 + |b|^2)`.
pub fn default_epsilon(rows: &[RowSlice]) -> f64 {
    1e-10 * (1.0 + rhs_norm_sq(rows))
}
