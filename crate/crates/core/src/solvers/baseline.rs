//! Jacobi, Gauss-Seidel and Richardson agents.
//!
//! Agents assume every other estimate starts at zero and learn neighbor
//! values from broadcasts. When a row references agents two hops away, each
//! iteration takes two rounds: estimates are broadcast, then each agent
//! rebroadcasts the table of values it just heard.

use crate::linalg::{eigen_extremes_spd, spectral_norm, LinalgError, POWER_TOL};
use crate::network::{AgentId, Network};
use crate::partial::PartialVector;
use crate::sim::{
    run_synchronous, sequential_sweep, Agent, Message, Outbox, Payload, RunOptions, RunTrace, SimError, Status,
};
use crate::solvers::{SolverConfig, SolverError};
use crate::system::{check_rows, rows_to_dense, system_reach, RowSlice, SystemError};

/// Estimates whose norm exceeds this are treated as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StationaryRule {
    Jacobi,
    GaussSeidel,
    Richardson { omega: f64 },
}

#[derive(Debug, Clone)]
pub struct StationaryAgent {
    id: AgentId,
    n: usize,
    row: RowSlice,
    rule: StationaryRule,
    reach: usize,
    x: Vec<f64>,
    /// Latest values of other agents, `n x width` row-major.
    known: Vec<f64>,
    /// Whether an agent's value was heard directly (not relayed).
    direct: Vec<bool>,
    direct_ids: Vec<AgentId>,
    relay_next: bool,
    iterations: usize,
}

impl StationaryAgent {
    fn new(row: RowSlice, n: usize, rule: StationaryRule, reach: usize) -> Self {
        Self {
            id: row.owner(),
            n,
            x: vec![0.0; row.width()],
            known: vec![0.0; n * row.width()],
            direct: vec![false; n],
            direct_ids: Vec::new(),
            row,
            rule,
            reach,
            relay_next: false,
            iterations: 0,
        }
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Engine rounds per iteration.
    pub fn rounds_per_iteration(&self) -> usize {
        self.reach
    }

    fn value(&self, j: AgentId, c: usize) -> f64 {
        if j == self.id {
            self.x[c]
        } else {
            self.known[j * self.x.len() + c]
        }
    }

    fn absorb(&mut self, inbox: &[Message<'_>]) {
        let mut relays = Vec::new();
        for msg in inbox {
            match msg.payload {
                Payload::StateShare(values) => {
                    let width = self.x.len();
                    self.known[msg.sender * width..(msg.sender + 1) * width].copy_from_slice(values);
                    if !self.direct[msg.sender] {
                        self.direct[msg.sender] = true;
                        self.direct_ids.push(msg.sender);
                        self.direct_ids.sort_unstable();
                    }
                }
                Payload::PartialVectorShare(tables) => relays.push(tables.as_slice()),
                _ => {}
            }
        }
        if relays.is_empty() {
            return;
        }
        let width = self.x.len();
        for &(j, _) in self.row.coefficients() {
            if j == self.id || self.direct[j] {
                continue;
            }
            for c in 0..width {
                let found = relays.iter().find_map(|tables| tables.get(c).and_then(|t| t.get(j)));
                if let Some(v) = found {
                    self.known[j * width + c] = v;
                }
            }
        }
    }

    fn update(&mut self) -> Result<(), SolverError> {
        let next: Vec<f64> = (0..self.x.len())
            .map(|c| {
                let b = self.row.rhs()[c];
                match self.rule {
                    StationaryRule::Jacobi | StationaryRule::GaussSeidel => {
                        let off: f64 = self
                            .row
                            .coefficients()
                            .iter()
                            .filter(|&&(j, _)| j != self.id)
                            .map(|&(j, a)| a * self.value(j, c))
                            .sum();
                        (b - off) / self.row.diagonal()
                    }
                    StationaryRule::Richardson { omega } => {
                        self.x[c] + omega * (b - self.row.apply(|j| self.value(j, c)))
                    }
                }
            })
            .collect();
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm.is_nan() || norm > DIVERGENCE_LIMIT {
            return Err(SolverError::DivergenceDetected(norm));
        }
        self.x = next;
        self.iterations += 1;
        Ok(())
    }

    fn relay_table(&self) -> Payload {
        let tables = (0..self.x.len())
            .map(|c| {
                let width = self.x.len();
                let heard = self.direct_ids.iter().map(|&j| (j, self.known[j * width + c]));
                let entries = std::iter::once((self.id, self.x[c])).chain(heard);
                PartialVector::from_entries(self.n, entries).expect("agent ids are below n")
            })
            .collect();
        Payload::PartialVectorShare(tables)
    }
}

impl Agent for StationaryAgent {
    fn send(&mut self, _round: usize, outbox: &mut Outbox) {
        if self.relay_next {
            outbox.broadcast(self.relay_table());
        } else {
            outbox.broadcast(Payload::StateShare(self.x.clone()));
        }
    }

    fn receive(&mut self, _round: usize, inbox: &[Message<'_>]) -> Result<Status, SolverError> {
        self.absorb(inbox);
        if self.reach > 1 && !self.relay_next {
            self.relay_next = true;
            return Ok(Status::Running);
        }
        self.relay_next = false;
        self.update()?;
        Ok(Status::Running)
    }

    fn estimate(&self) -> &[f64] {
        &self.x
    }
}

fn build(
    rows: &[RowSlice],
    net: &Network,
    rule: StationaryRule,
    max_reach: usize,
) -> Result<Vec<StationaryAgent>, SolverError> {
    let (n, _) = check_rows(rows)?;
    if n != net.n() {
        return Err(SolverError::LengthMismatch {
            expected: net.n(),
            actual: n,
        });
    }
    if matches!(rule, StationaryRule::Jacobi | StationaryRule::GaussSeidel) {
        if let Some(row) = rows.iter().find(|r| r.diagonal() == 0.0) {
            return Err(SolverError::ZeroDiagonal(row.owner()));
        }
    }
    if let StationaryRule::Richardson { omega } = rule {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(SolverError::InvalidConfig(format!("omega must be positive, got {omega}")));
        }
    }
    let reach = system_reach(rows, net).unwrap_or(usize::MAX).max(1);
    if reach > max_reach {
        crate::system::check_locality(rows, net, max_reach)?;
    }
    Ok(rows
        .iter()
        .map(|row| StationaryAgent::new(row.clone(), n, rule, reach))
        .collect())
}

/// Jacobi agents for a system reaching at most two hops.
pub fn jacobi_agents(rows: &[RowSlice], net: &Network) -> Result<Vec<StationaryAgent>, SolverError> {
    build(rows, net, StationaryRule::Jacobi, 2)
}

/// Richardson agents with relaxation `omega`.
pub fn richardson_agents(rows: &[RowSlice], net: &Network, omega: f64) -> Result<Vec<StationaryAgent>, SolverError> {
    build(rows, net, StationaryRule::Richardson { omega }, 2)
}

/// Gauss-Seidel agents for [`sequential_sweep`]; rows must only reference
/// direct neighbors.
pub fn gauss_seidel_agents(rows: &[RowSlice], net: &Network) -> Result<Vec<StationaryAgent>, SolverError> {
    build(rows, net, StationaryRule::GaussSeidel, 1)
}

/// `2 / (lambda_max + lambda_min)` of the assembled system, computed centrally.
///
/// On badly conditioned systems the shifted power iteration for `lambda_min`
/// may stall; its last Rayleigh quotient is then used, which can only
/// overestimate `lambda_min` and so keeps the iteration convergent.
pub fn default_richardson_omega(rows: &[RowSlice]) -> Result<f64, SolverError> {
    let (a, _) = rows_to_dense(rows)?;
    match eigen_extremes_spd(&a, POWER_TOL) {
        Ok(extremes) => Ok(extremes.richardson_omega()),
        Err(LinalgError::NoConvergence { best_estimate, .. }) => {
            let lambda_max = spectral_norm(&a, POWER_TOL).map_err(SystemError::from)?;
            let lambda_min = lambda_max - best_estimate;
            if !(lambda_min > 0.0 && lambda_min < lambda_max) {
                return Err(SystemError::from(LinalgError::NotPositiveDefinite(lambda_min)).into());
            }
            Ok(2.0 / (lambda_max + lambda_min))
        }
        Err(e) => Err(SystemError::from(e).into()),
    }
}

/// Result of a stationary-iteration run.
#[derive(Debug, Clone)]
pub struct StationaryRun {
    pub trace: RunTrace,
    pub iterations: usize,
    pub rounds_per_iteration: usize,
}

impl StationaryRun {
    pub fn converged(&self) -> bool {
        self.trace.converged()
    }
}

/// Runs stationary agents until the central residual drops below the
/// configured epsilon or `max_iterations` elapse. Gauss-Seidel agents run in
/// the sequential sweep engine.
pub fn run_stationary(
    mut agents: Vec<StationaryAgent>,
    rows: &[RowSlice],
    net: &Network,
    config: &SolverConfig,
    max_iterations: usize,
    ground_truth: Option<&[Vec<f64>]>,
    snapshots: bool,
) -> Result<StationaryRun, SimError> {
    let epsilon = config.resolved_epsilon(rows)?;
    let per_iteration = agents.first().map_or(1, StationaryAgent::rounds_per_iteration);
    let sequential = agents.first().is_some_and(|a| a.rule == StationaryRule::GaussSeidel);
    let mut options = RunOptions::new(max_iterations.max(1) * per_iteration)
        .system(rows)
        .halt_below(epsilon);
    if let Some(truth) = ground_truth {
        options = options.ground_truth(truth);
    }
    if snapshots {
        options = options.record_snapshots();
    }
    let trace = if sequential {
        sequential_sweep(&mut agents, net, &options)?
    } else {
        run_synchronous(&mut agents, net, &options)?
    };
    Ok(StationaryRun {
        iterations: agents.first().map_or(0, StationaryAgent::iterations),
        rounds_per_iteration: per_iteration,
        trace,
    })
}
