//! Deterministic synchronous-round message passing.
//!
//! A round has two phases: every running agent fills its outbox, the engine
//! delivers all messages, then every running agent processes its inbox. A
//! value flooded from one agent therefore reaches agents `k` hops away after
//! exactly `k` rounds.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::network::{AgentId, Network};
use crate::partial::PartialVector;
use crate::solvers::SolverError;
use crate::system::{mean_squared_error, residual_sq, RowSlice};

const BYTES_PER_SCALAR: usize = 8;
const SNAPSHOT_CAP: usize = 1024;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("agent {from} addressed a message to non-neighbor {to}")]
    NonNeighborSend { from: AgentId, to: AgentId },
    #[error("expected {expected} agents, got {actual}")]
    AgentCountMismatch { expected: usize, actual: usize },
    #[error("invalid run option: {0}")]
    InvalidOption(String),
    #[error("agent {agent} failed in round {round}: {source}")]
    Agent {
        agent: AgentId,
        round: usize,
        #[source]
        source: SolverError,
    },
    #[error("solver setup: {0}")]
    Solver(#[from] SolverError),
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
}

/// Message contents exchanged between neighbors.
#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    ScalarShare { index: usize, value: f64 },
    /// One partial vector per right-hand-side column.
    PartialVectorShare(Vec<PartialVector>),
    StateShare(Vec<f64>),
    /// A row's nonzeros together with its right-hand side.
    RowShare { entries: Vec<(usize, f64)>, rhs: Vec<f64> },
}

impl Payload {
    /// Scalars carried (index overhead ignored).
    pub fn scalar_count(&self) -> usize {
        match self {
            Payload::ScalarShare { .. } => 1,
            Payload::PartialVectorShare(pvs) => pvs.iter().map(PartialVector::known_count).sum(),
            Payload::StateShare(v) => v.len(),
            Payload::RowShare { entries, rhs } => entries.len() + rhs.len(),
        }
    }
}

/// A delivered message as seen by the recipient.
#[derive(Debug, Clone, Copy)]
pub struct Message<'a> {
    pub sender: AgentId,
    pub payload: &'a Payload,
}

#[derive(Debug)]
enum Target {
    Broadcast,
    To(AgentId),
}

/// Messages an agent emits in one round.
#[derive(Debug, Default)]
pub struct Outbox {
    items: Vec<(Target, Payload)>,
}

impl Outbox {
    /// Sends `payload` to every neighbor.
    pub fn broadcast(&mut self, payload: Payload) {
        self.items.push((Target::Broadcast, payload));
    }

    pub fn send(&mut self, to: AgentId, payload: Payload) {
        self.items.push((Target::To(to), payload));
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltReason {
    Converged,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Running,
    Halted(HaltReason),
}

/// Per-agent behavior. Agents see only their own state and their inbox.
pub trait Agent {
    fn send(&mut self, round: usize, outbox: &mut Outbox);

    /// Processes the messages delivered this round, sorted by sender.
    fn receive(&mut self, round: usize, inbox: &[Message<'_>]) -> Result<Status, SolverError>;

    /// Current estimate, one entry per right-hand-side column.
    fn estimate(&self) -> &[f64];
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub messages_sent: usize,
    pub messages_delivered: usize,
    pub bytes_modeled: usize,
    pub per_agent_halted: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// Every agent halted on its own.
    AllHalted,
    /// The harness-observed residual fell below the requested threshold.
    ResidualBelowThreshold,
    MaxRoundsExceeded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub round: usize,
    pub estimates: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rounds: Vec<RoundReport>,
    /// `|A x - b|^2` after each round; NaN when no system was supplied.
    pub residual_sq_history: Vec<f64>,
    /// Mean squared error after each round; NaN without ground truth.
    pub mse_history: Vec<f64>,
    pub final_estimates: Vec<Vec<f64>>,
    pub halt_reasons: Vec<Option<HaltReason>>,
    pub outcome: Outcome,
    /// Thinned estimate history, including the initial state at round 0.
    pub snapshots: Vec<Snapshot>,
}

impl RunTrace {
    pub fn round_count(&self) -> usize {
        self.rounds.len()
    }

    /// True when the run stopped because every agent converged or the
    /// residual threshold was met.
    pub fn converged(&self) -> bool {
        match self.outcome {
            Outcome::ResidualBelowThreshold => true,
            Outcome::AllHalted => self.halt_reasons.iter().all(|r| *r == Some(HaltReason::Converged)),
            Outcome::MaxRoundsExceeded => false,
        }
    }

    pub fn messages_total(&self) -> usize {
        self.rounds.iter().map(|r| r.messages_sent).sum()
    }

    pub fn bytes_total(&self) -> usize {
        self.rounds.iter().map(|r| r.bytes_modeled).sum()
    }

    pub fn final_mse(&self) -> Option<f64> {
        self.mse_history.last().copied().filter(|v| !v.is_nan())
    }

    /// CSV with columns `round,residual_sq,mse,messages_sent`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("round,residual_sq,mse,messages_sent\n");
        for (k, report) in self.rounds.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{:e},{:e},{}",
                report.round, self.residual_sq_history[k], self.mse_history[k], report.messages_sent
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), SimError> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        file.write_all(self.to_csv().as_bytes())?;
        file.flush()?;
        Ok(())
    }
}

/// Parameters for a run.
#[derive(Debug, Clone)]
pub struct RunOptions<'a> {
    max_rounds: usize,
    ground_truth: Option<&'a [Vec<f64>]>,
    system: Option<&'a [RowSlice]>,
    halt_below: Option<f64>,
    step_order: Option<Vec<AgentId>>,
    snapshots: bool,
}

impl<'a> RunOptions<'a> {
    pub fn new(max_rounds: usize) -> Self {
        Self {
            max_rounds,
            ground_truth: None,
            system: None,
            halt_below: None,
            step_order: None,
            snapshots: false,
        }
    }

    /// Per-agent ground truth used for the MSE history.
    pub fn ground_truth(mut self, truth: &'a [Vec<f64>]) -> Self {
        self.ground_truth = Some(truth);
        self
    }

    /// System rows used for the central residual history.
    pub fn system(mut self, rows: &'a [RowSlice]) -> Self {
        self.system = Some(rows);
        self
    }

    /// Stops the run once the central residual drops below `threshold`.
    /// Requires [`RunOptions::system`].
    pub fn halt_below(mut self, threshold: f64) -> Self {
        self.halt_below = Some(threshold);
        self
    }

    /// Order in which agents are processed within each phase.
    pub fn step_order(mut self, order: Vec<AgentId>) -> Self {
        self.step_order = Some(order);
        self
    }

    /// Records a thinned history of all estimates.
    pub fn record_snapshots(mut self) -> Self {
        self.snapshots = true;
        self
    }

    fn validate(&self, n: usize) -> Result<Vec<AgentId>, SimError> {
        if self.max_rounds == 0 {
            return Err(SimError::InvalidOption("max_rounds must be at least 1".into()));
        }
        if self.halt_below.is_some() && self.system.is_none() {
            return Err(SimError::InvalidOption("halt_below requires system rows".into()));
        }
        if let Some(rows) = self.system {
            if rows.len() != n {
                return Err(SimError::AgentCountMismatch {
                    expected: n,
                    actual: rows.len(),
                });
            }
        }
        if let Some(truth) = self.ground_truth {
            if truth.len() != n {
                return Err(SimError::AgentCountMismatch {
                    expected: n,
                    actual: truth.len(),
                });
            }
        }
        match &self.step_order {
            None => Ok((0..n).collect()),
            Some(order) => {
                let mut seen = vec![false; n];
                for &i in order {
                    if i >= n || std::mem::replace(&mut seen[i], true) {
                        return Err(SimError::InvalidOption("step_order is not a permutation".into()));
                    }
                }
                if order.len() != n {
                    return Err(SimError::InvalidOption("step_order is not a permutation".into()));
                }
                Ok(order.clone())
            }
        }
    }
}

struct Recorder<'a> {
    options: &'a RunOptions<'a>,
    residual_sq_history: Vec<f64>,
    mse_history: Vec<f64>,
    snapshots: Vec<Snapshot>,
    stride: usize,
    scratch: Vec<Vec<f64>>,
}

impl<'a> Recorder<'a> {
    fn new<A: Agent>(options: &'a RunOptions<'a>, agents: &[A]) -> Self {
        let mut rec = Self {
            options,
            residual_sq_history: Vec::new(),
            mse_history: Vec::new(),
            snapshots: Vec::new(),
            stride: 1,
            scratch: collect_estimates(agents),
        };
        if options.snapshots {
            rec.snapshots.push(Snapshot {
                round: 0,
                estimates: collect_estimates(agents),
            });
        }
        rec
    }

    /// Records metrics after `round`; returns the central residual.
    fn record<A: Agent>(&mut self, round: usize, agents: &[A]) -> f64 {
        for (buf, agent) in self.scratch.iter_mut().zip(agents) {
            buf.clear();
            buf.extend_from_slice(agent.estimate());
        }
        let estimates = &self.scratch;
        let residual = self.options.system.map_or(f64::NAN, |rows| residual_sq(rows, estimates));
        let mse = self
            .options
            .ground_truth
            .map_or(f64::NAN, |truth| mean_squared_error(estimates, truth));
        self.residual_sq_history.push(residual);
        self.mse_history.push(mse);
        if self.options.snapshots && round.is_multiple_of(self.stride) {
            self.snapshots.push(Snapshot {
                round,
                estimates: estimates.clone(),
            });
            if self.snapshots.len() > SNAPSHOT_CAP {
                self.stride *= 2;
                let stride = self.stride;
                self.snapshots.retain(|s| s.round % stride == 0);
            }
        }
        residual
    }

    fn finish<A: Agent>(
        mut self,
        rounds: Vec<RoundReport>,
        agents: &[A],
        halt_reasons: Vec<Option<HaltReason>>,
        outcome: Outcome,
    ) -> RunTrace {
        let final_estimates = collect_estimates(agents);
        if self.options.snapshots {
            let last = rounds.last().map_or(0, |r| r.round);
            if self.snapshots.last().is_none_or(|s| s.round != last) {
                self.snapshots.push(Snapshot {
                    round: last,
                    estimates: final_estimates.clone(),
                });
            }
        }
        RunTrace {
            rounds,
            residual_sq_history: self.residual_sq_history,
            mse_history: self.mse_history,
            final_estimates,
            halt_reasons,
            outcome,
            snapshots: self.snapshots,
        }
    }
}

fn collect_estimates<A: Agent>(agents: &[A]) -> Vec<Vec<f64>> {
    agents.iter().map(|a| a.estimate().to_vec()).collect()
}

fn resolve_targets<'a>(net: &'a Network, from: AgentId, target: &'a Target) -> Result<&'a [AgentId], SimError> {
    match target {
        Target::Broadcast => Ok(net.neighbors(from)),
        Target::To(to) if net.is_neighbor(from, *to) => Ok(std::slice::from_ref(to)),
        &Target::To(to) => Err(SimError::NonNeighborSend { from, to }),
    }
}

/// Runs agents in lockstep rounds until all halt, the residual threshold is
/// met, or `max_rounds` elapse.
pub fn run_synchronous<A: Agent>(
    agents: &mut [A],
    net: &Network,
    options: &RunOptions<'_>,
) -> Result<RunTrace, SimError> {
    let n = net.n();
    if agents.len() != n {
        return Err(SimError::AgentCountMismatch {
            expected: n,
            actual: agents.len(),
        });
    }
    let order = options.validate(n)?;
    let mut recorder = Recorder::new(options, agents);
    let mut halted: Vec<Option<HaltReason>> = vec![None; n];
    let mut rounds = Vec::new();
    let mut outcome = Outcome::MaxRoundsExceeded;

    let mut inboxes: Vec<Vec<(AgentId, usize, usize)>> = vec![Vec::new(); n];
    let mut payloads: Vec<Payload> = Vec::new();
    for round in 1..=options.max_rounds {
        inboxes.iter_mut().for_each(Vec::clear);
        payloads.clear();
        let mut messages_sent = 0;
        let mut bytes = 0;
        for &i in &order {
            if halted[i].is_some() {
                continue;
            }
            let mut outbox = Outbox::default();
            agents[i].send(round, &mut outbox);
            for (seq, (target, payload)) in outbox.items.into_iter().enumerate() {
                let recipients = resolve_targets(net, i, &target)?;
                messages_sent += recipients.len();
                bytes += recipients.len() * payload.scalar_count() * BYTES_PER_SCALAR;
                let slot = payloads.len();
                payloads.push(payload);
                for &to in recipients {
                    inboxes[to].push((i, seq, slot));
                }
            }
        }
        let mut messages_delivered = 0;
        let mut messages: Vec<Message<'_>> = Vec::new();
        for &i in &order {
            if halted[i].is_some() {
                continue;
            }
            let inbox = &mut inboxes[i];
            inbox.sort_unstable_by_key(|&(sender, seq, _)| (sender, seq));
            messages_delivered += inbox.len();
            messages.clear();
            messages.extend(inbox.iter().map(|&(sender, _, slot)| Message {
                sender,
                payload: &payloads[slot],
            }));
            let status = agents[i]
                .receive(round, &messages)
                .map_err(|source| SimError::Agent { agent: i, round, source })?;
            if let Status::Halted(reason) = status {
                halted[i] = Some(reason);
            }
        }
        rounds.push(RoundReport {
            round,
            messages_sent,
            messages_delivered,
            bytes_modeled: bytes,
            per_agent_halted: halted.iter().map(Option::is_some).collect(),
        });
        let residual = recorder.record(round, agents);
        if halted.iter().all(Option::is_some) {
            outcome = Outcome::AllHalted;
            break;
        }
        if options.halt_below.is_some_and(|eps| residual < eps) {
            outcome = Outcome::ResidualBelowThreshold;
            break;
        }
    }
    Ok(recorder.finish(rounds, agents, halted, outcome))
}

/// Runs agents one at a time in ascending id order (or the configured step
/// order); each activation processes everything delivered since the agent's
/// previous activation, then sends. Messages are delivered immediately, so
/// later agents in the same sweep see earlier agents' updates.
pub fn sequential_sweep<A: Agent>(
    agents: &mut [A],
    net: &Network,
    options: &RunOptions<'_>,
) -> Result<RunTrace, SimError> {
    let n = net.n();
    if agents.len() != n {
        return Err(SimError::AgentCountMismatch {
            expected: n,
            actual: agents.len(),
        });
    }
    let order = options.validate(n)?;
    let mut recorder = Recorder::new(options, agents);
    let mut halted: Vec<Option<HaltReason>> = vec![None; n];
    let mut pending: Vec<Vec<(AgentId, Payload)>> = vec![Vec::new(); n];
    let mut rounds = Vec::new();
    let mut outcome = Outcome::MaxRoundsExceeded;

    for sweep in 1..=options.max_rounds {
        let mut messages_sent = 0;
        let mut messages_delivered = 0;
        let mut bytes = 0;
        for &i in &order {
            if halted[i].is_some() {
                continue;
            }
            let mut inbox = std::mem::take(&mut pending[i]);
            inbox.sort_by_key(|&(sender, _)| sender);
            messages_delivered += inbox.len();
            let messages: Vec<Message<'_>> = inbox
                .iter()
                .map(|(sender, payload)| Message {
                    sender: *sender,
                    payload,
                })
                .collect();
            let status = agents[i]
                .receive(sweep, &messages)
                .map_err(|source| SimError::Agent {
                    agent: i,
                    round: sweep,
                    source,
                })?;
            if let Status::Halted(reason) = status {
                halted[i] = Some(reason);
                continue;
            }
            let mut outbox = Outbox::default();
            agents[i].send(sweep, &mut outbox);
            for (target, payload) in outbox.items {
                let recipients = resolve_targets(net, i, &target)?;
                messages_sent += recipients.len();
                bytes += recipients.len() * payload.scalar_count() * BYTES_PER_SCALAR;
                for &to in recipients {
                    pending[to].push((i, payload.clone()));
                }
            }
        }
        rounds.push(RoundReport {
            round: sweep,
            messages_sent,
            messages_delivered,
            bytes_modeled: bytes,
            per_agent_halted: halted.iter().map(Option::is_some).collect(),
        });
        let residual = recorder.record(sweep, agents);
        if halted.iter().all(Option::is_some) {
            outcome = Outcome::AllHalted;
            break;
        }
        if options.halt_below.is_some_and(|eps| residual < eps) {
            outcome = Outcome::ResidualBelowThreshold;
            break;
        }
    }
    Ok(recorder.finish(rounds, agents, halted, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Forwards a token once; records the round it arrived.
    struct Echo {
        has_token: bool,
        forwarded: bool,
        arrived: Option<usize>,
        value: [f64; 1],
    }

    impl Echo {
        fn new(has_token: bool) -> Self {
            Self {
                has_token,
                forwarded: false,
                arrived: has_token.then_some(0),
                value: [0.0],
            }
        }
    }

    impl Agent for Echo {
        fn send(&mut self, _round: usize, outbox: &mut Outbox) {
            if self.has_token && !self.forwarded {
                outbox.broadcast(Payload::ScalarShare { index: 0, value: 1.0 });
                self.forwarded = true;
            }
        }

        fn receive(&mut self, round: usize, inbox: &[Message<'_>]) -> Result<Status, SolverError> {
            if !inbox.is_empty() && !self.has_token {
                self.has_token = true;
                self.arrived = Some(round);
                self.value[0] = 1.0;
            }
            Ok(Status::Running)
        }

        fn estimate(&self) -> &[f64] {
            &self.value
        }
    }

    #[test]
    fn token_reaches_far_end_in_two_rounds() {
        let net = Network::path(3);
        let mut agents = vec![Echo::new(true), Echo::new(false), Echo::new(false)];
        let trace = run_synchronous(&mut agents, &net, &RunOptions::new(3)).unwrap();
        assert_eq!(agents[1].arrived, Some(1));
        assert_eq!(agents[2].arrived, Some(2));
        assert_eq!(trace.outcome, Outcome::MaxRoundsExceeded);
        assert_eq!(trace.rounds[0].messages_sent, 1);
        for r in &trace.rounds {
            assert_eq!(r.messages_sent, r.messages_delivered);
        }
    }

    struct Quitter([f64; 1]);

    impl Agent for Quitter {
        fn send(&mut self, _round: usize, _outbox: &mut Outbox) {}

        fn receive(&mut self, _round: usize, _inbox: &[Message<'_>]) -> Result<Status, SolverError> {
            Ok(Status::Halted(HaltReason::Converged))
        }

        fn estimate(&self) -> &[f64] {
            &self.0
        }
    }

    #[test]
    fn immediate_halt_gives_one_report() {
        let net = Network::complete(3);
        let mut agents = vec![Quitter([0.0]), Quitter([0.0]), Quitter([0.0])];
        let trace = run_synchronous(&mut agents, &net, &RunOptions::new(10)).unwrap();
        assert_eq!(trace.rounds.len(), 1);
        assert_eq!(trace.outcome, Outcome::AllHalted);
        assert!(trace.converged());
        assert_eq!(trace.to_csv().lines().count(), 2);
    }

    struct Rogue([f64; 1]);

    impl Agent for Rogue {
        fn send(&mut self, _round: usize, outbox: &mut Outbox) {
            outbox.send(2, Payload::StateShare(vec![1.0]));
        }

        fn receive(&mut self, _round: usize, _inbox: &[Message<'_>]) -> Result<Status, SolverError> {
            Ok(Status::Running)
        }

        fn estimate(&self) -> &[f64] {
            &self.0
        }
    }

    #[test]
    fn non_neighbor_send_is_rejected() {
        let net = Network::path(3);
        let mut agents = vec![Rogue([0.0]), Rogue([0.0]), Rogue([0.0])];
        let err = run_synchronous(&mut agents, &net, &RunOptions::new(1)).unwrap_err();
        assert!(matches!(err, SimError::NonNeighborSend { from: 0, to: 2 }));
    }

    #[test]
    fn options_are_validated() {
        let net = Network::path(2);
        let mut agents = vec![Quitter([0.0]), Quitter([0.0])];
        assert!(run_synchronous(&mut agents, &net, &RunOptions::new(0)).is_err());
        assert!(run_synchronous(&mut agents, &net, &RunOptions::new(1).step_order(vec![0, 0])).is_err());
        assert!(run_synchronous(&mut agents, &net, &RunOptions::new(1).halt_below(1.0)).is_err());
    }
}
