//! Distributed conjugate gradient over simulated multi-agent networks.
//!
//! Every agent owns one row of a linear system and talks only to its graph
//! neighbors. The crate provides the round-based engine, the distributed
//! conjugate gradient protocol, stationary baselines (Jacobi, Gauss-Seidel,
//! Richardson), builders for least-squares and localization systems, and
//! dense oracles used to check all of them.

pub mod apps;
pub mod linalg;
pub mod network;
pub mod partial;
pub mod sim;
pub mod solvers;
pub mod system;

pub use linalg::{DenseMatrix, DenseVector, EigenExtremes, LinalgError, SplitPair, SplitScheme};
pub use network::{AgentId, HopDiameter, Network, NetworkError};
pub use partial::PartialVector;
pub use sim::{Agent, Message, Outbox, Outcome, Payload, RoundReport, RunOptions, RunTrace, SimError, Status};
pub use solvers::{DcgMode, SolverConfig, SolverError};
pub use system::{RowSlice, SystemError};
