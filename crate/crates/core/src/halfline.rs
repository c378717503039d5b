//! Synchronous round-based simulation on the discrete half-line.
//!
//! The half-line is materialized lazily: a node is its index, and the
//! degree is 1 exactly at index 0. Rounds use snapshot semantics: every
//! agent's observation is computed from the round-start configuration,
//! then all non-terminated agents transition and move simultaneously.

use crate::machine::{AgentId, AgentState, Degree, Label, Move, ObsSet, Observation, StepFault, Team};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::io::Write;
use std::rc::Rc;
use thiserror::Error;

/// Positions and states of all agents at a round boundary, indexed in team
/// roster order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    pub round: u64,
    pub positions: Vec<u64>,
    pub states: Vec<AgentState>,
}

impl Configuration {
    pub fn all_stopped(&self) -> bool {
        self.states.iter().all(|s| s.is_stop())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("team has arity {expected} but {found} arguments were given")]
    ArityMismatch { expected: u32, found: usize },
}

/// A rule violation detected while stepping.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Fault {
    #[error("round {round}: agent {agent} output left at the root")]
    LeftAtRoot { agent: AgentId, round: u64 },
    #[error("round {round}: agent {agent} transitioned into foreign state {state}")]
    ForeignState {
        agent: AgentId,
        state: String,
        round: u64,
    },
    #[error("round {round}: {fault}")]
    Controller { fault: StepFault, round: u64 },
    #[error("round {round}: non-gathered termination (agents stopped at different nodes)")]
    ScatteredStop { round: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    RoundBudgetExceeded,
    Fault(Fault),
}

/// Outcome of a simulation.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: RunStatus,
    /// Node where all agents stopped; present iff `status == Completed`.
    pub value: Option<u64>,
    /// Rounds executed (the final configuration's round number).
    pub rounds: u64,
    /// Earliest round in which every designated synchronizer was at the
    /// root, tracked over every round regardless of trace recording.
    pub sync_round: Option<u64>,
    pub trace: Option<Vec<Configuration>>,
    /// Moves produced from each recorded configuration, aligned with
    /// `trace`. The final configuration produces no moves.
    pub trace_moves: Option<Vec<Vec<Move>>>,
    /// Hash over the full round-by-round evolution (not just recorded
    /// samples); equal hashes mean identical runs.
    pub trace_hash: String,
    /// Counts of transitions into each watched (agent, label), aligned
    /// with `RunOptions::watch_label_entries`.
    pub label_entry_counts: Vec<u64>,
    /// States each agent was observed in, when collection was requested.
    pub observed_states: Option<Vec<BTreeSet<AgentState>>>,
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub max_rounds: u64,
    pub record_trace: bool,
    /// Record every Nth round (the final configuration is always kept).
    pub trace_every: u64,
    pub watch_label_entries: Vec<(AgentId, Label)>,
    pub collect_observed: bool,
}

impl RunOptions {
    pub fn new(max_rounds: u64) -> Self {
        RunOptions {
            max_rounds,
            record_trace: false,
            trace_every: 1,
            watch_label_entries: Vec::new(),
            collect_observed: false,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions::new(1_000_000)
    }
}

/// Places every agent of group `i` at node `args[i]` in its start state.
pub fn init_configuration(team: &Team, args: &[u64]) -> Result<Configuration, SimError> {
    if args.len() != team.arity() as usize {
        return Err(SimError::ArityMismatch {
            expected: team.arity(),
            found: args.len(),
        });
    }
    let mut positions = vec![0u64; team.len()];
    for (group, &arg) in team.groups().iter().zip(args) {
        for id in group {
            positions[team.agent_index(id).expect("validated team")] = arg;
        }
    }
    let states = team.agents().iter().map(|a| a.start_state()).collect();
    Ok(Configuration {
        round: 0,
        positions,
        states,
    })
}

fn degree_of(position: u64) -> Degree {
    if position == 0 {
        Degree::Root
    } else {
        Degree::Interior
    }
}

/// One synchronous round under snapshot semantics.
pub fn step(team: &Team, config: &Configuration) -> Result<Configuration, Fault> {
    step_with_moves(team, config).map(|(c, _)| c)
}

/// One round, also reporting each agent's move.
pub fn step_with_moves(
    team: &Team,
    config: &Configuration,
) -> Result<(Configuration, Vec<Move>), Fault> {
    // Snapshot: the full state set per node, shared by its occupants.
    let mut node_sets: BTreeMap<u64, BTreeSet<AgentState>> = BTreeMap::new();
    for (pos, state) in config.positions.iter().zip(&config.states) {
        node_sets.entry(*pos).or_default().insert(state.clone());
    }
    let node_sets: BTreeMap<u64, Rc<ObsSet>> = node_sets
        .into_iter()
        .map(|(node, states)| (node, Rc::new(ObsSet::from_states(states))))
        .collect();

    let round = config.round;
    let mut positions = Vec::with_capacity(team.len());
    let mut states = Vec::with_capacity(team.len());
    let mut moves = Vec::with_capacity(team.len());
    for (n, agent) in team.agents().iter().enumerate() {
        let state = &config.states[n];
        let pos = config.positions[n];
        if state.is_stop() {
            positions.push(pos);
            states.push(AgentState::Stop);
            moves.push(Move::Stay);
            continue;
        }
        let obs = Observation::new(
            degree_of(pos),
            node_sets[&pos].clone(),
            Some(state.clone()),
        );
        let (next, mv) = agent
            .step(state, &obs)
            .map_err(|fault| Fault::Controller { fault, round })?;
        if !next.is_stop() && !agent.owns(&next) {
            return Err(Fault::ForeignState {
                agent: agent.id().clone(),
                state: next.to_string(),
                round,
            });
        }
        let next_pos = match mv {
            Move::Stay => pos,
            Move::Right => pos + 1,
            Move::Left => {
                if pos == 0 {
                    return Err(Fault::LeftAtRoot {
                        agent: agent.id().clone(),
                        round,
                    });
                }
                pos - 1
            }
        };
        positions.push(next_pos);
        states.push(next);
        moves.push(mv);
    }
    Ok((
        Configuration {
            round: round + 1,
            positions,
            states,
        },
        moves,
    ))
}

fn hash_configuration(hasher: &mut Sha256, config: &Configuration) {
    let mut buf = Vec::with_capacity(config.states.len() * 16);
    buf.extend_from_slice(&config.round.to_le_bytes());
    for (pos, state) in config.positions.iter().zip(&config.states) {
        buf.extend_from_slice(&pos.to_le_bytes());
        state.encode(&mut buf);
    }
    hasher.update(&buf);
}

/// Runs the team until all agents stop, the budget is exhausted, or a
/// fault occurs.
pub fn run(team: &Team, args: &[u64], options: &RunOptions) -> Result<RunResult, SimError> {
    let mut config = init_configuration(team, args)?;
    let sync_indexes: Vec<usize> = team
        .synchronizers()
        .iter()
        .map(|id| team.agent_index(id).expect("validated team"))
        .collect();
    let watch_indexes: Vec<(usize, Label)> = options
        .watch_label_entries
        .iter()
        .map(|(id, label)| (team.agent_index(id).expect("watched agent exists"), *label))
        .collect();
    let mut watch_in: Vec<bool> = vec![false; watch_indexes.len()];
    let mut label_entry_counts = vec![0u64; watch_indexes.len()];

    let mut sync_round = None;
    let mut hasher = Sha256::new();
    let mut trace: Vec<Configuration> = Vec::new();
    let mut trace_moves: Vec<Vec<Move>> = Vec::new();
    let mut observed: Option<Vec<BTreeSet<AgentState>>> =
        options.collect_observed.then(|| vec![BTreeSet::new(); team.len()]);

    let finish = |status: RunStatus,
                  value: Option<u64>,
                  config: &Configuration,
                  sync_round: Option<u64>,
                  hasher: Sha256,
                  mut trace: Vec<Configuration>,
                  mut trace_moves: Vec<Vec<Move>>,
                  label_entry_counts: Vec<u64>,
                  observed: Option<Vec<BTreeSet<AgentState>>>| {
        if options.record_trace && trace.last().map(|c| c.round) != Some(config.round) {
            trace.push(config.clone());
            trace_moves.push(vec![Move::Stay; config.states.len()]);
        }
        Ok(RunResult {
            status,
            value,
            rounds: config.round,
            sync_round,
            trace: options.record_trace.then_some(trace),
            trace_moves: options.record_trace.then_some(trace_moves),
            trace_hash: format!("{:x}", hasher.finalize()),
            label_entry_counts,
            observed_states: observed,
        })
    };

    loop {
        // Per-round bookkeeping from the fresh configuration.
        if sync_round.is_none() && sync_indexes.iter().all(|&n| config.positions[n] == 0) {
            sync_round = Some(config.round);
        }
        hash_configuration(&mut hasher, &config);
        if let Some(observed) = observed.as_mut() {
            for (set, state) in observed.iter_mut().zip(&config.states) {
                set.insert(state.clone());
            }
        }
        for (slot, (n, label)) in watch_in.iter_mut().zip(&watch_indexes) {
            let now = matches!(&config.states[*n],
                AgentState::Named { label: l, .. } if l == label);
            if now && !*slot {
                label_entry_counts[watch_indexes
                    .iter()
                    .position(|(m, l)| m == n && l == label)
                    .unwrap()] += 1;
            }
            *slot = now;
        }

        if config.all_stopped() {
            let node = config.positions[0];
            if config.positions.iter().any(|&p| p != node) {
                let fault = Fault::ScatteredStop {
                    round: config.round,
                };
                return finish(
                    RunStatus::Fault(fault),
                    None,
                    &config,
                    sync_round,
                    hasher,
                    trace,
                    trace_moves,
                    label_entry_counts,
                    observed,
                );
            }
            return finish(
                RunStatus::Completed,
                Some(node),
                &config,
                sync_round,
                hasher,
                trace,
                trace_moves,
                label_entry_counts,
                observed,
            );
        }
        if config.round >= options.max_rounds {
            return finish(
                RunStatus::RoundBudgetExceeded,
                None,
                &config,
                sync_round,
                hasher,
                trace,
                trace_moves,
                label_entry_counts,
                observed,
            );
        }

        match step_with_moves(team, &config) {
            Ok((next, moves)) => {
                if options.record_trace && config.round % options.trace_every == 0 {
                    trace.push(config.clone());
                    trace_moves.push(moves);
                }
                config = next;
            }
            Err(fault) => {
                return finish(
                    RunStatus::Fault(fault),
                    None,
                    &config,
                    sync_round,
                    hasher,
                    trace,
                    trace_moves,
                    label_entry_counts,
                    observed,
                );
            }
        }
    }
}

/// Checks the safety rules over a recorded trace: positions change by at
/// most one per round, nothing moves left from the root, stopped agents
/// never change again, and a fully stopped final configuration is gathered
/// at one node.
pub fn verify_trace(trace: &[Configuration]) -> Result<(), String> {
    for pair in trace.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        if b.round != a.round + 1 {
            continue; // downsampled gap; per-round checks need adjacency
        }
        for n in 0..a.positions.len() {
            let (pa, pb) = (a.positions[n], b.positions[n]);
            if pa.abs_diff(pb) > 1 {
                return Err(format!(
                    "agent {n} jumped from node {pa} to {pb} at round {}",
                    b.round
                ));
            }
            if pa == 0 && pb > pa + 1 {
                return Err(format!("agent {n} moved right twice from root"));
            }
            if a.states[n].is_stop() {
                if !b.states[n].is_stop() {
                    return Err(format!("agent {n} left STOP at round {}", b.round));
                }
                if pa != pb {
                    return Err(format!("agent {n} moved while stopped at round {}", b.round));
                }
            }
        }
    }
    if let Some(last) = trace.last() {
        if last.all_stopped() {
            let node = last.positions[0];
            if last.positions.iter().any(|&p| p != node) {
                return Err("final configuration stopped but not gathered".into());
            }
        }
    }
    Ok(())
}

/// Writes the recorded trace as line-delimited records, one per
/// (round, agent), followed by a summary record.
pub fn export_trace_jsonl<W: Write>(
    team: &Team,
    result: &RunResult,
    mut out: W,
) -> std::io::Result<()> {
    if let (Some(trace), Some(moves)) = (&result.trace, &result.trace_moves) {
        for (config, round_moves) in trace.iter().zip(moves) {
            for (n, agent) in team.agents().iter().enumerate() {
                let record = serde_json::json!({
                    "round": config.round,
                    "agent_id": agent.id().to_string(),
                    "node": config.positions[n],
                    "state_label": config.states[n].to_string(),
                    "moved": round_moves[n].to_string(),
                });
                writeln!(out, "{record}")?;
            }
        }
    }
    let status = match &result.status {
        RunStatus::Completed => "completed".to_string(),
        RunStatus::RoundBudgetExceeded => "round-budget-exceeded".to_string(),
        RunStatus::Fault(f) => format!("fault: {f}"),
    };
    let summary = serde_json::json!({
        "summary": true,
        "status": status,
        "value": result.value,
        "rounds": result.rounds,
        "sync_round": result.sync_round,
        "trace_hash": result.trace_hash,
    });
    writeln!(out, "{summary}")
}

/// Compact multi-line rendering of a configuration, for debugging output.
pub fn format_configuration(team: &Team, config: &Configuration) -> String {
    let mut by_node: BTreeMap<u64, Vec<String>> = BTreeMap::new();
    for (n, agent) in team.agents().iter().enumerate() {
        by_node
            .entry(config.positions[n])
            .or_default()
            .push(format!("{}={}", agent.id(), config.states[n]));
    }
    let mut out = format!("round {}:\n", config.round);
    for (node, entries) in by_node {
        out.push_str(&format!("  node {node}: {}\n", entries.join(", ")));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::{AgentId, Controller, EnumerationError, Label};
    use std::sync::Arc;

    /// Walks left until the root, then stops.
    #[derive(Debug)]
    struct RootSeeker {
        id: AgentId,
    }

    impl Controller for RootSeeker {
        fn id(&self) -> &AgentId {
            &self.id
        }
        fn start_state(&self) -> AgentState {
            AgentState::named(self.id.clone(), Label::Init, 0)
        }
        fn step(&self, state: &AgentState, obs: &Observation) -> Result<(AgentState, Move), StepFault> {
            if state.is_stop() {
                return Ok((AgentState::Stop, Move::Stay));
            }
            match obs.degree {
                Degree::Root => Ok((AgentState::Stop, Move::Stay)),
                Degree::Interior => Ok((state.clone(), Move::Left)),
            }
        }
        fn owns(&self, state: &AgentState) -> bool {
            matches!(state, AgentState::Named { agent, .. } if agent == &self.id)
        }
        fn enumerate_states(&self, _cap: usize) -> Result<BTreeSet<AgentState>, EnumerationError> {
            Ok([self.start_state()].into())
        }
    }

    /// Stops immediately wherever it is.
    #[derive(Debug)]
    struct Freezer {
        id: AgentId,
    }

    impl Controller for Freezer {
        fn id(&self) -> &AgentId {
            &self.id
        }
        fn start_state(&self) -> AgentState {
            AgentState::named(self.id.clone(), Label::Init, 0)
        }
        fn step(&self, _: &AgentState, _: &Observation) -> Result<(AgentState, Move), StepFault> {
            Ok((AgentState::Stop, Move::Stay))
        }
        fn owns(&self, state: &AgentState) -> bool {
            matches!(state, AgentState::Named { agent, .. } if agent == &self.id)
        }
        fn enumerate_states(&self, _cap: usize) -> Result<BTreeSet<AgentState>, EnumerationError> {
            Ok([self.start_state()].into())
        }
    }

    /// Always outputs left, even at the root.
    #[derive(Debug)]
    struct Lemming {
        id: AgentId,
    }

    impl Controller for Lemming {
        fn id(&self) -> &AgentId {
            &self.id
        }
        fn start_state(&self) -> AgentState {
            AgentState::named(self.id.clone(), Label::Init, 0)
        }
        fn step(&self, state: &AgentState, _: &Observation) -> Result<(AgentState, Move), StepFault> {
            Ok((state.clone(), Move::Left))
        }
        fn owns(&self, state: &AgentState) -> bool {
            matches!(state, AgentState::Named { agent, .. } if agent == &self.id)
        }
        fn enumerate_states(&self, _cap: usize) -> Result<BTreeSet<AgentState>, EnumerationError> {
            Ok([self.start_state()].into())
        }
    }

    fn one_agent_team(agent: Arc<dyn Controller>) -> Team {
        let id = agent.id().clone();
        Team::new(vec![agent], vec![vec![id.clone()]], vec![id], 1).unwrap()
    }

    #[test]
    fn init_places_groups_at_arguments() {
        let a = Arc::new(RootSeeker { id: AgentId::new("a") });
        let b = Arc::new(Freezer { id: AgentId::new("b") });
        let team = Team::new(
            vec![a, b],
            vec![vec![AgentId::new("a")], vec![AgentId::new("b")]],
            vec![AgentId::new("a"), AgentId::new("b")],
            2,
        )
        .unwrap();
        let config = init_configuration(&team, &[4, 7]).unwrap();
        assert_eq!(config.positions, vec![4, 7]);
        assert_eq!(config.round, 0);

        let err = init_configuration(&team, &[4]).unwrap_err();
        assert_eq!(
            err,
            SimError::ArityMismatch {
                expected: 2,
                found: 1
            }
        );
    }

    #[test]
    fn root_seeker_reaches_root_and_stops() {
        let team = one_agent_team(Arc::new(RootSeeker { id: AgentId::new("a") }));
        let result = run(&team, &[5], &RunOptions::default()).unwrap();
        assert_eq!(result.status, RunStatus::Completed);
        assert_eq!(result.value, Some(0));
        assert_eq!(result.rounds, 6); // five moves left, one stopping round
        assert_eq!(result.sync_round, Some(5));
    }

    #[test]
    fn stop_is_absorbing_in_the_simulator() {
        let team = one_agent_team(Arc::new(Freezer { id: AgentId::new("a") }));
        let config = init_configuration(&team, &[3]).unwrap();
        let c1 = step(&team, &config).unwrap();
        assert!(c1.all_stopped());
        let c2 = step(&team, &c1).unwrap();
        assert_eq!(c1.positions, c2.positions);
        assert!(c2.all_stopped());
    }

    #[test]
    fn left_at_root_is_a_fault() {
        let team = one_agent_team(Arc::new(Lemming { id: AgentId::new("a") }));
        let result = run(&team, &[2], &RunOptions::default()).unwrap();
        match result.status {
            RunStatus::Fault(Fault::LeftAtRoot { round, .. }) => assert_eq!(round, 2),
            other => panic!("expected left-at-root fault, got {other:?}"),
        }
    }

    #[test]
    fn scattered_stop_is_a_fault() {
        let a = Arc::new(Freezer { id: AgentId::new("a") });
        let b = Arc::new(Freezer { id: AgentId::new("b") });
        let team = Team::new(
            vec![a, b],
            vec![vec![AgentId::new("a")], vec![AgentId::new("b")]],
            vec![AgentId::new("a"), AgentId::new("b")],
            2,
        )
        .unwrap();
        let result = run(&team, &[1, 4], &RunOptions::default()).unwrap();
        assert!(matches!(
            result.status,
            RunStatus::Fault(Fault::ScatteredStop { .. })
        ));
        assert_eq!(result.value, None);
    }

    #[test]
    fn budget_exhaustion_reported() {
        let team = one_agent_team(Arc::new(RootSeeker { id: AgentId::new("a") }));
        let result = run(&team, &[100], &RunOptions::new(10)).unwrap();
        assert_eq!(result.status, RunStatus::RoundBudgetExceeded);
    }

    #[test]
    fn identical_runs_hash_identically() {
        let team = one_agent_team(Arc::new(RootSeeker { id: AgentId::new("a") }));
        let r1 = run(&team, &[5], &RunOptions::default()).unwrap();
        let r2 = run(&team, &[5], &RunOptions::default()).unwrap();
        assert_eq!(r1.trace_hash, r2.trace_hash);
        let r3 = run(&team, &[6], &RunOptions::default()).unwrap();
        assert_ne!(r1.trace_hash, r3.trace_hash);
    }

    #[test]
    fn trace_recording_and_verification() {
        let team = one_agent_team(Arc::new(RootSeeker { id: AgentId::new("a") }));
        let result = run(&team, &[5], &RunOptions::new(100).with_trace()).unwrap();
        let trace = result.trace.as_ref().unwrap();
        assert_eq!(trace.first().unwrap().round, 0);
        assert_eq!(trace.last().unwrap().round, result.rounds);
        assert_eq!(trace.len() as u64, result.rounds + 1);
        verify_trace(trace).unwrap();
    }

    #[test]
    fn trace_export_has_one_line_per_round_agent_plus_summary() {
        let team = one_agent_team(Arc::new(RootSeeker { id: AgentId::new("a") }));
        let result = run(&team, &[2], &RunOptions::new(100).with_trace()).unwrap();
        let mut buf = Vec::new();
        export_trace_jsonl(&team, &result, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len() as u64, (result.rounds + 1) + 1);
        let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
        assert_eq!(first["round"], 0);
        assert_eq!(first["node"], 2);
        assert_eq!(first["moved"], "left");
        let summary: serde_json::Value = serde_json::from_str(lines.last().unwrap()).unwrap();
        assert_eq!(summary["summary"], true);
        assert_eq!(summary["status"], "completed");
        assert_eq!(summary["value"], 0);
    }
}
