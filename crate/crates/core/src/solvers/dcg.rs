//! Distributed conjugate gradient.
//!
//! Each outer iteration synchronizes the residual, the search direction and
//! the curvature vector `T = A d` across the whole network (plus the previous
//! residual in strict mode). Every agent then holds identical complete
//! vectors and computes the global scalars locally, in the same index order,
//! so all agents agree on every step size bit for bit.
//!
//! Agents also keep a mirror of the full estimate vector, advanced with the
//! synchronized direction and the shared step size. Residual components that
//! reference other agents' estimates read from this mirror.

use crate::network::{AgentId, Network};
use crate::partial::PartialVector;
use crate::sim::{run_synchronous, Agent, HaltReason, Message, Outbox, RunOptions, RunTrace, SimError, Status};
use crate::solvers::sync::VectorSync;
use crate::solvers::{DcgMode, SolverConfig, SolverError};
use crate::system::{check_rows, RowSlice};

const CURVATURE_FLOOR: f64 = 1e-300;

/// `r_i = -b_i + sum_j A_ij x_j` for right-hand-side column `column`.
pub fn residual_component(
    row: &RowSlice,
    column: usize,
    estimate_of: impl Fn(AgentId) -> Option<f64>,
) -> Result<f64, SolverError> {
    let mut acc = 0.0;
    for &(j, a) in row.coefficients() {
        acc += a * estimate_of(j).ok_or(SolverError::MissingNeighborState(j))?;
    }
    Ok(acc - row.rhs()[column])
}

/// True (halt) iff the squared norm of `r_full` is strictly below `epsilon`.
pub fn check_residual(r_full: &PartialVector, epsilon: f64) -> Result<bool, SolverError> {
    Ok(r_full.sum_sq()? < epsilon)
}

/// `d_i = -r_i + (|r|^2 / |r_prev|^2) d_i_prev`.
pub fn update_direction(
    own: AgentId,
    d_prev: f64,
    r_full: &PartialVector,
    r_prev_full: &PartialVector,
) -> Result<f64, SolverError> {
    let rr = r_full.sum_sq()?;
    let rr_prev = r_prev_full.sum_sq()?;
    if rr_prev == 0.0 {
        return Err(SolverError::ZeroPrevResidual);
    }
    let r_own = r_full.get(own).ok_or(SolverError::Incomplete { index: own })?;
    Ok(-r_own + (rr / rr_prev) * d_prev)
}

/// `T_i = sum_j A_ij d_j`.
pub fn curvature_component(row: &RowSlice, d_full: &PartialVector) -> Result<f64, SolverError> {
    let mut acc = 0.0;
    for &(j, a) in row.coefficients() {
        acc += a * d_full.get(j).ok_or(SolverError::Incomplete { index: j })?;
    }
    Ok(acc)
}

/// `alpha = -(d . r) / (d . T)`.
pub fn step_size(d_full: &PartialVector, r_full: &PartialVector, t_full: &PartialVector) -> Result<f64, SolverError> {
    let denom = d_full.dot(t_full)?;
    if denom.abs() < CURVATURE_FLOOR {
        return Err(SolverError::ZeroCurvature(denom));
    }
    Ok(-d_full.dot(r_full)? / denom)
}

/// Which vector the agent is currently synchronizing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Residual,
    PrevResidual,
    Direction,
    Curvature,
    Done,
}

/// Global scalars of one completed outer iteration, per column. Columns that
/// had already converged carry NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual_sq: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct DcgAgent {
    id: AgentId,
    n: usize,
    row: RowSlice,
    epsilon: f64,
    t_max: usize,
    horizon: usize,
    mode: DcgMode,
    estimate: Vec<f64>,
    /// `mirror[c][j]`: this agent's copy of agent `j`'s estimate.
    mirror: Vec<Vec<f64>>,
    residual: Vec<f64>,
    residual_prev: Vec<f64>,
    direction: Vec<f64>,
    step: Vec<f64>,
    active: Vec<bool>,
    r_full: Vec<Option<PartialVector>>,
    r_prev_full: Vec<Option<PartialVector>>,
    d_full: Vec<Option<PartialVector>>,
    phase: Phase,
    sync: Option<VectorSync>,
    sync_columns: Vec<usize>,
    iteration: usize,
    history: Vec<IterationRecord>,
}

impl DcgAgent {
    pub fn new(row: RowSlice, n: usize, epsilon: f64, t_max: usize, horizon: usize, mode: DcgMode) -> Self {
        let width = row.width();
        let neg_b: Vec<f64> = row.rhs().iter().map(|b| -b).collect();
        let mut agent = Self {
            id: row.owner(),
            n,
            epsilon,
            t_max,
            horizon: horizon.max(1),
            mode,
            estimate: vec![0.0; width],
            mirror: vec![vec![0.0; n]; width],
            residual: neg_b.clone(),
            residual_prev: neg_b,
            direction: vec![0.0; width],
            step: vec![0.0; width],
            active: vec![true; width],
            r_full: vec![None; width],
            r_prev_full: vec![None; width],
            d_full: vec![None; width],
            phase: Phase::Residual,
            sync: None,
            sync_columns: Vec::new(),
            iteration: 1,
            history: Vec::new(),
            row,
        };
        agent.begin_residual();
        agent
    }

    pub fn id(&self) -> AgentId {
        self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Completed outer iterations.
    pub fn outer_iterations(&self) -> usize {
        self.history.len()
    }

    pub fn history(&self) -> &[IterationRecord] {
        &self.history
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    pub fn direction(&self) -> &[f64] {
        &self.direction
    }

    pub fn step_size(&self) -> &[f64] {
        &self.step
    }

    /// Engine rounds sufficient for `t_max` iterations in either mode.
    pub fn round_budget(&self) -> usize {
        self.horizon * (4 * self.t_max + 1)
    }

    fn begin_sync(&mut self, phase: Phase, values: impl Fn(&Self, usize) -> f64) {
        self.sync_columns = (0..self.active.len()).filter(|&c| self.active[c]).collect();
        let own: Vec<f64> = self.sync_columns.iter().map(|&c| values(self, c)).collect();
        self.sync = Some(VectorSync::start(self.n, self.id, &own, self.horizon));
        self.phase = phase;
    }

    fn begin_residual(&mut self) {
        for c in 0..self.active.len() {
            if self.active[c] {
                let mirror = &self.mirror[c];
                self.residual[c] = residual_component(&self.row, c, |j| mirror.get(j).copied())
                    .expect("mirror covers every column");
            }
        }
        self.begin_sync(Phase::Residual, |s, c| s.residual[c]);
    }

    fn begin_direction(&mut self) -> Result<(), SolverError> {
        for &c in &self.sync_columns {
            let r_full = self.r_full[c].as_ref().expect("residual synchronized");
            let r_prev = self.r_prev_full[c].as_ref().expect("previous residual known");
            self.direction[c] = update_direction(self.id, self.direction[c], r_full, r_prev)?;
        }
        self.begin_sync(Phase::Direction, |s, c| s.direction[c]);
        Ok(())
    }

    fn halt(&mut self, reason: HaltReason) -> Status {
        self.phase = Phase::Done;
        self.sync = None;
        Status::Halted(reason)
    }

    fn on_residual(&mut self, synced: Vec<PartialVector>) -> Result<Status, SolverError> {
        let columns = self.sync_columns.clone();
        for (c, pv) in columns.into_iter().zip(synced) {
            if check_residual(&pv, self.epsilon)? {
                self.active[c] = false;
            }
            if self.iteration == 1 {
                // r(1) = -b exactly when starting from zero, which is r(0).
                self.r_prev_full[c] = Some(pv.clone());
            }
            self.r_full[c] = Some(pv);
        }
        if !self.active.iter().any(|&a| a) {
            return Ok(self.halt(HaltReason::Converged));
        }
        match self.mode {
            DcgMode::Strict => self.begin_sync(Phase::PrevResidual, |s, c| s.residual_prev[c]),
            DcgMode::Cached => {
                // Drop columns that just converged from the batch.
                self.sync_columns.retain(|&c| self.active[c]);
                self.begin_direction()?;
            }
        }
        Ok(Status::Running)
    }

    fn on_prev_residual(&mut self, synced: Vec<PartialVector>) -> Result<Status, SolverError> {
        let columns = self.sync_columns.clone();
        for (c, pv) in columns.into_iter().zip(synced) {
            self.r_prev_full[c] = Some(pv);
        }
        self.begin_direction()?;
        Ok(Status::Running)
    }

    fn on_direction(&mut self, synced: Vec<PartialVector>) -> Result<Status, SolverError> {
        let columns = self.sync_columns.clone();
        let mut curvature = vec![0.0; self.active.len()];
        for (c, pv) in columns.into_iter().zip(synced) {
            curvature[c] = curvature_component(&self.row, &pv)?;
            self.d_full[c] = Some(pv);
        }
        self.begin_sync(Phase::Curvature, |_, c| curvature[c]);
        Ok(Status::Running)
    }

    fn on_curvature(&mut self, synced: Vec<PartialVector>) -> Result<Status, SolverError> {
        let width = self.active.len();
        let mut record = IterationRecord {
            iteration: self.iteration,
            residual_sq: vec![f64::NAN; width],
            alpha: vec![f64::NAN; width],
        };
        let columns = self.sync_columns.clone();
        for (c, t_full) in columns.into_iter().zip(synced) {
            let d_full = self.d_full[c].as_ref().expect("direction synchronized");
            let r_full = self.r_full[c].as_ref().expect("residual synchronized");
            let alpha = step_size(d_full, r_full, &t_full)?;
            self.step[c] = alpha;
            self.estimate[c] += alpha * self.direction[c];
            let d = d_full.values()?;
            for (m, &dj) in self.mirror[c].iter_mut().zip(d) {
                *m += alpha * dj;
            }
            record.alpha[c] = alpha;
            record.residual_sq[c] = r_full.sum_sq()?;
            // The next residual follows from r + alpha T without another sync.
            let next_sq: f64 = r_full
                .values()?
                .iter()
                .zip(t_full.values()?)
                .map(|(r, t)| {
                    let v = r + alpha * t;
                    v * v
                })
                .sum();
            if next_sq < self.epsilon {
                self.active[c] = false;
            }
            self.residual_prev[c] = self.residual[c];
            self.r_prev_full[c] = self.r_full[c].take();
        }
        self.history.push(record);
        if !self.active.iter().any(|&a| a) {
            return Ok(self.halt(HaltReason::Converged));
        }
        if self.iteration >= self.t_max {
            return Ok(self.halt(HaltReason::IterationLimit));
        }
        self.iteration += 1;
        self.begin_residual();
        Ok(Status::Running)
    }
}

impl Agent for DcgAgent {
    fn send(&mut self, _round: usize, outbox: &mut Outbox) {
        if let Some(sync) = &self.sync {
            outbox.broadcast(sync.payload());
        }
    }

    fn receive(&mut self, _round: usize, inbox: &[Message<'_>]) -> Result<Status, SolverError> {
        let Some(sync) = self.sync.as_mut() else {
            return Ok(Status::Halted(HaltReason::Converged));
        };
        if !sync.absorb(inbox)? {
            return Ok(Status::Running);
        }
        let synced = self.sync.take().expect("sync present").finish()?;
        match self.phase {
            Phase::Residual => self.on_residual(synced),
            Phase::PrevResidual => self.on_prev_residual(synced),
            Phase::Direction => self.on_direction(synced),
            Phase::Curvature => self.on_curvature(synced),
            Phase::Done => Ok(Status::Halted(HaltReason::Converged)),
        }
    }

    fn estimate(&self) -> &[f64] {
        &self.estimate
    }
}

/// Builds one DCG agent per row.
pub fn dcg_agents(rows: &[RowSlice], net: &Network, config: &SolverConfig) -> Result<Vec<DcgAgent>, SolverError> {
    let (n, _) = check_rows(rows)?;
    if n != net.n() {
        return Err(SolverError::LengthMismatch {
            expected: net.n(),
            actual: n,
        });
    }
    let epsilon = config.resolved_epsilon(rows)?;
    let t_max = config.resolved_t_max(n)?;
    let horizon = match config.h_override {
        Some(0) => return Err(SolverError::InvalidConfig("horizon must be at least 1".into())),
        Some(h) => h,
        None => net.hop_diameter()?.hops().max(1),
    };
    Ok(rows
        .iter()
        .map(|row| DcgAgent::new(row.clone(), n, epsilon, t_max, horizon, config.mode))
        .collect())
}

/// Result of a complete DCG run.
#[derive(Debug, Clone)]
pub struct DcgRun {
    pub trace: RunTrace,
    pub outer_iterations: usize,
    pub horizon: usize,
    /// Global scalars per iteration as computed by agent 0.
    pub history: Vec<IterationRecord>,
    pub agents: Vec<DcgAgent>,
}

impl DcgRun {
    pub fn converged(&self) -> bool {
        self.trace.converged()
    }

    pub fn engine_rounds(&self) -> usize {
        self.trace.round_count()
    }
}

/// Runs DCG to completion; `options` supplies ground truth and snapshots, its
/// round cap is raised to the agents' budget when lower.
pub fn run_dcg(
    rows: &[RowSlice],
    net: &Network,
    config: &SolverConfig,
    ground_truth: Option<&[Vec<f64>]>,
    snapshots: bool,
) -> Result<DcgRun, SimError> {
    let mut agents = dcg_agents(rows, net, config)?;
    let budget = agents.first().map_or(1, DcgAgent::round_budget);
    let mut options = RunOptions::new(budget).system(rows);
    if let Some(truth) = ground_truth {
        options = options.ground_truth(truth);
    }
    if snapshots {
        options = options.record_snapshots();
    }
    let trace = run_synchronous(&mut agents, net, &options)?;
    let history = agents.first().map(|a| a.history().to_vec()).unwrap_or_default();
    Ok(DcgRun {
        trace,
        outer_iterations: history.len(),
        horizon: agents.first().map_or(1, DcgAgent::horizon),
        history,
        agents,
    })
}
