//! Full-vector synchronization by flooding partial vectors for `horizon` rounds.

use crate::network::{AgentId, Network};
use crate::partial::PartialVector;
use crate::sim::{run_synchronous, Agent, HaltReason, Message, Outbox, Payload, RunOptions, SimError, Status};
use crate::solvers::SolverError;

/// One in-progress synchronization of a batch of vectors (one per column).
#[derive(Debug, Clone)]
pub struct VectorSync {
    horizon: usize,
    elapsed: usize,
    buffers: Vec<PartialVector>,
}

impl VectorSync {
    /// Starts with only this agent's own component known in each column.
    pub fn start(n: usize, own: AgentId, own_values: &[f64], horizon: usize) -> Self {
        Self {
            horizon,
            elapsed: 0,
            buffers: own_values.iter().map(|&v| PartialVector::single(n, own, v)).collect(),
        }
    }

    pub fn payload(&self) -> Payload {
        Payload::PartialVectorShare(self.buffers.clone())
    }

    /// Merges one round of neighbor shares; returns true once `horizon`
    /// rounds have elapsed.
    pub fn absorb(&mut self, inbox: &[Message<'_>]) -> Result<bool, SolverError> {
        for msg in inbox {
            if let Payload::PartialVectorShare(shares) = msg.payload {
                if shares.len() != self.buffers.len() {
                    return Err(SolverError::LengthMismatch {
                        expected: self.buffers.len(),
                        actual: shares.len(),
                    });
                }
                for (buf, share) in self.buffers.iter_mut().zip(shares) {
                    buf.merge_from(share)?;
                }
            }
        }
        self.elapsed += 1;
        Ok(self.is_done())
    }

    pub fn is_done(&self) -> bool {
        self.elapsed >= self.horizon
    }

    pub fn buffers(&self) -> &[PartialVector] {
        &self.buffers
    }

    /// The synchronized vectors; fails if any index is still unknown.
    pub fn finish(self) -> Result<Vec<PartialVector>, SolverError> {
        for buf in &self.buffers {
            if let Some(index) = buf.first_missing() {
                return Err(SolverError::Incomplete { index });
            }
        }
        Ok(self.buffers)
    }
}

/// Agent that runs a single synchronization and halts.
#[derive(Debug, Clone)]
pub struct SyncAgent {
    sync: Option<VectorSync>,
    own: [f64; 1],
    result: Option<PartialVector>,
}

impl SyncAgent {
    pub fn new(n: usize, own: AgentId, value: f64, horizon: usize) -> Self {
        Self {
            sync: Some(VectorSync::start(n, own, &[value], horizon)),
            own: [value],
            result: None,
        }
    }

    pub fn result(&self) -> Option<&PartialVector> {
        self.result.as_ref()
    }
}

impl Agent for SyncAgent {
    fn send(&mut self, _round: usize, outbox: &mut Outbox) {
        if let Some(sync) = &self.sync {
            outbox.broadcast(sync.payload());
        }
    }

    fn receive(&mut self, _round: usize, inbox: &[Message<'_>]) -> Result<Status, SolverError> {
        let Some(sync) = self.sync.as_mut() else {
            return Ok(Status::Halted(HaltReason::Converged));
        };
        if sync.absorb(inbox)? {
            let done = self.sync.take().expect("sync present");
            self.result = done.finish()?.pop();
            return Ok(Status::Halted(HaltReason::Converged));
        }
        Ok(Status::Running)
    }

    fn estimate(&self) -> &[f64] {
        &self.own
    }
}

/// Runs one synchronization of `values` (one per agent) over `net`.
pub fn synchronize_vector(net: &Network, values: &[f64], horizon: usize) -> Result<Vec<PartialVector>, SimError> {
    let n = net.n();
    if values.len() != n {
        return Err(SimError::AgentCountMismatch {
            expected: n,
            actual: values.len(),
        });
    }
    if horizon == 0 {
        return Err(SimError::InvalidOption("horizon must be at least 1".into()));
    }
    let mut agents: Vec<SyncAgent> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| SyncAgent::new(n, i, v, horizon))
        .collect();
    run_synchronous(&mut agents, net, &RunOptions::new(horizon))?;
    Ok(agents
        .into_iter()
        .map(|a| a.result.expect("sync completes within its horizon"))
        .collect())
}
