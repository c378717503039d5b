//! Agents as deterministic finite controllers.
//!
//! An agent observes the degree of its node (1 at the root, 2 elsewhere)
//! and the set of states of the other agents at the same node, then picks
//! a successor state and a move from `{stay, right, left}`. Distinct
//! agents' reachable states are disjoint except for the shared terminal
//! `Stop`, so a state identifies its agent and conditions can be phrased
//! as "agent X is visible in label L".

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::rc::Rc;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Unique agent name. Hierarchical: nested constructions prefix their
/// sub-team agents with a path, which keeps ids globally unique.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(Arc<str>);

impl AgentId {
    pub fn new(name: impl Into<String>) -> Self {
        AgentId(Arc::from(name.into().as_str()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId::new(s)
    }
}

/// Named state tokens. Together with a program counter these form the
/// finite per-agent state space; every token an agent can show is fixed
/// when its controller is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Init,
    Wait,
    Reached,
    Begin,
    Computed,
    EndPhase,
    Count,
    LastPhase,
    Start,
    Coord,
    Step,
    Increase,
    Gather,
    Visit(u32),
    Finish(u32),
    FinishAll,
    EndComputation,
}

impl Label {
    fn code(self) -> (u8, u32) {
        match self {
            Label::Init => (0, 0),
            Label::Wait => (1, 0),
            Label::Reached => (2, 0),
            Label::Begin => (3, 0),
            Label::Computed => (4, 0),
            Label::EndPhase => (5, 0),
            Label::Count => (6, 0),
            Label::LastPhase => (7, 0),
            Label::Start => (8, 0),
            Label::Coord => (9, 0),
            Label::Step => (10, 0),
            Label::Increase => (11, 0),
            Label::Gather => (12, 0),
            Label::Visit(i) => (13, i),
            Label::Finish(i) => (14, i),
            Label::FinishAll => (15, 0),
            Label::EndComputation => (16, 0),
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Init => write!(f, "init"),
            Label::Wait => write!(f, "wait"),
            Label::Reached => write!(f, "reached"),
            Label::Begin => write!(f, "begin"),
            Label::Computed => write!(f, "computed"),
            Label::EndPhase => write!(f, "endPhase"),
            Label::Count => write!(f, "count"),
            Label::LastPhase => write!(f, "lastPhase"),
            Label::Start => write!(f, "start"),
            Label::Coord => write!(f, "coord"),
            Label::Step => write!(f, "step"),
            Label::Increase => write!(f, "increase"),
            Label::Gather => write!(f, "gather"),
            Label::Visit(i) => write!(f, "visit_{i}"),
            Label::Finish(i) => write!(f, "finish_{i}"),
            Label::FinishAll => write!(f, "finish"),
            Label::EndComputation => write!(f, "endComputation"),
        }
    }
}

/// A structural state. Composite agents built from a pair of agents carry
/// the inner agent's state plus the partner's name: `PairH` while the
/// composite follows the first component, `PairG` while it follows the
/// second. Nesting is arbitrary.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AgentState {
    /// Shared terminal state. The only state two agents can have in common.
    Stop,
    /// A plain controller state: visible token plus program counter.
    Named {
        agent: AgentId,
        label: Label,
        pc: u32,
    },
    /// Composite following its first component; `partner` names the second.
    PairH {
        inner: Box<AgentState>,
        partner: AgentId,
    },
    /// Composite following its second component; `partner` names the first.
    PairG {
        inner: Box<AgentState>,
        partner: AgentId,
    },
}

impl AgentState {
    pub fn named(agent: AgentId, label: Label, pc: u32) -> Self {
        AgentState::Named { agent, label, pc }
    }

    pub fn is_stop(&self) -> bool {
        matches!(self, AgentState::Stop)
    }

    /// Appends a canonical byte encoding, used for trace hashing.
    pub fn encode(&self, out: &mut Vec<u8>) {
        match self {
            AgentState::Stop => out.push(0),
            AgentState::Named { agent, label, pc } => {
                out.push(1);
                out.extend_from_slice(agent.as_str().as_bytes());
                out.push(0xff);
                out.extend_from_slice(&pc.to_le_bytes());
                let (tag, arg) = label.code();
                out.push(tag);
                out.extend_from_slice(&arg.to_le_bytes());
            }
            AgentState::PairH { inner, partner } => {
                out.push(2);
                out.extend_from_slice(partner.as_str().as_bytes());
                out.push(0xff);
                inner.encode(out);
            }
            AgentState::PairG { inner, partner } => {
                out.push(3);
                out.extend_from_slice(partner.as_str().as_bytes());
                out.push(0xff);
                inner.encode(out);
            }
        }
    }
}

impl fmt::Display for AgentState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AgentState::Stop => write!(f, "STOP"),
            AgentState::Named { agent, label, pc } => write!(f, "{agent}:{label}#{pc}"),
            AgentState::PairH { inner, partner } => write!(f, "h({inner} | {partner})"),
            AgentState::PairG { inner, partner } => write!(f, "g({inner} | {partner})"),
        }
    }
}

/// Node degree on the half-line: 1 at the root, 2 everywhere else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Degree {
    Root,
    Interior,
}

impl Degree {
    pub fn as_u8(self) -> u8 {
        match self {
            Degree::Root => 1,
            Degree::Interior => 2,
        }
    }
}

/// Output alphabet: stay idle, take port 0 (right), or take port 1 (left).
/// Left is illegal at the root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Move {
    Stay,
    Right,
    Left,
}

impl fmt::Display for Move {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Move::Stay => write!(f, "stay"),
            Move::Right => write!(f, "right"),
            Move::Left => write!(f, "left"),
        }
    }
}

/// A condition over observed states: a set of (agent, label) pairs that
/// must all be visible. Program counters are deliberately not part of a
/// condition; a token may span several counters of its agent.
pub type StateSet = BTreeSet<(AgentId, Label)>;

/// The set of states present at a node, with an index of the named tokens
/// for condition tests. Shared by every agent at the node; the projection
/// cache lets colocated composite copies reuse one computed inner view
/// per round instead of re-deriving it each.
#[derive(Debug, Default)]
pub struct ObsSet {
    states: BTreeSet<AgentState>,
    named: BTreeSet<(AgentId, Label)>,
    projections: RefCell<HashMap<(usize, u8), Rc<ObsSet>>>,
}

impl ObsSet {
    pub fn from_states(states: BTreeSet<AgentState>) -> Self {
        let named = states
            .iter()
            .filter_map(|s| match s {
                AgentState::Named { agent, label, .. } => Some((agent.clone(), *label)),
                _ => None,
            })
            .collect();
        ObsSet {
            states,
            named,
            projections: RefCell::new(HashMap::new()),
        }
    }

    pub fn states(&self) -> &BTreeSet<AgentState> {
        &self.states
    }

    /// Returns the cached projection for `key`, computing it from the full
    /// state set on first use. Keys identify the projection rule (shared
    /// instruction data), so all copies at the node hit the same entry.
    pub fn projection_with(
        &self,
        key: (usize, u8),
        compute: impl FnOnce(&BTreeSet<AgentState>) -> BTreeSet<AgentState>,
    ) -> Rc<ObsSet> {
        if let Some(hit) = self.projections.borrow().get(&key) {
            return hit.clone();
        }
        let projected = Rc::new(ObsSet::from_states(compute(&self.states)));
        self.projections
            .borrow_mut()
            .insert(key, projected.clone());
        projected
    }
}

/// One round's input for one agent: the node degree and the states of all
/// *other* agents at the node. `exclude` lets colocated agents share one
/// `ObsSet` while each sees everything but its own state.
#[derive(Debug, Clone)]
pub struct Observation {
    pub degree: Degree,
    colocated: Rc<ObsSet>,
    exclude: Option<AgentState>,
}

impl Observation {
    pub fn new(degree: Degree, colocated: Rc<ObsSet>, exclude: Option<AgentState>) -> Self {
        Observation {
            degree,
            colocated,
            exclude,
        }
    }

    /// True if `agent` is visible here in `label`.
    pub fn sees(&self, agent: &AgentId, label: Label) -> bool {
        if !self.colocated.named.contains(&(agent.clone(), label)) {
            return false;
        }
        match &self.exclude {
            Some(AgentState::Named {
                agent: a, label: l, ..
            }) if a == agent && *l == label => {
                // The excluded state might be the only occurrence.
                self.iter().any(|s| {
                    matches!(s, AgentState::Named { agent: a2, label: l2, .. }
                             if a2 == agent && l2 == &label)
                })
            }
            _ => true,
        }
    }

    /// True if every (agent, label) pair in the condition is visible.
    pub fn sees_all(&self, condition: &StateSet) -> bool {
        condition.iter().all(|(a, l)| self.sees(a, *l))
    }

    /// Iterates visible states (exclusion applied).
    pub fn iter(&self) -> impl Iterator<Item = &AgentState> {
        self.colocated
            .states
            .iter()
            .filter(move |s| Some(*s) != self.exclude.as_ref())
    }

    /// The visible states as an owned set.
    pub fn to_set(&self) -> BTreeSet<AgentState> {
        self.iter().cloned().collect()
    }

    /// Shared projection over the *full* node set (the observer applies
    /// its own exclusion on the derived observation). Cached per node per
    /// round under `key`.
    pub fn project_shared(
        &self,
        key: (usize, u8),
        compute: impl FnOnce(&BTreeSet<AgentState>) -> BTreeSet<AgentState>,
    ) -> Rc<ObsSet> {
        self.colocated.projection_with(key, compute)
    }
}

/// Packages one round's input exactly as the model defines it. The caller
/// guarantees `colocated` excludes the observing agent's own state.
pub fn observe(
    self_state: &AgentState,
    degree: Degree,
    colocated: BTreeSet<AgentState>,
) -> Observation {
    debug_assert!(
        self_state.is_stop() || !colocated.contains(self_state),
        "colocated set must exclude the observer"
    );
    Observation::new(degree, Rc::new(ObsSet::from_states(colocated)), None)
}

/// A controller fault surfaced by the simulator.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepFault {
    #[error("agent {agent}: control cycled without consuming a round (compile bug)")]
    ZeroCostLoop { agent: AgentId },
    #[error("agent {agent}: no label available after inner computation (compile bug)")]
    MissingLabel { agent: AgentId },
    #[error("agent {agent}: state {state} is outside the agent's slice")]
    ForeignState { agent: AgentId, state: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerationError {
    #[error("agent {agent}: reachable-state enumeration exceeded cap {cap}")]
    CapExceeded { agent: AgentId, cap: usize },
}

/// A deterministic finite controller.
pub trait Controller: Send + Sync {
    fn id(&self) -> &AgentId;
    fn start_state(&self) -> AgentState;
    /// One synchronous round: next state and move. Pure.
    fn step(&self, state: &AgentState, obs: &Observation) -> Result<(AgentState, Move), StepFault>;
    /// True if `state` lies in this agent's slice (or is `Stop`).
    fn owns(&self, state: &AgentState) -> bool;
    /// Enumerates a superset of the agent's reachable non-`Stop` states,
    /// independent of any input values. Deterministic.
    fn enumerate_states(&self, cap: usize) -> Result<BTreeSet<AgentState>, EnumerationError>;
}

/// Default cap for reachable-state enumeration.
pub const ENUMERATION_CAP: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TeamError {
    #[error("team has no agents")]
    Empty,
    #[error("group {index} is empty")]
    EmptyGroup { index: usize },
    #[error("agent {agent} appears in more than one group")]
    Overlap { agent: AgentId },
    #[error("agent {agent} belongs to no group")]
    Uncovered { agent: AgentId },
    #[error("group {index} names unknown agent {agent}")]
    UnknownAgent { index: usize, agent: AgentId },
    #[error("synchronizer {agent} is not in group {index}")]
    SynchronizerOutsideGroup { index: usize, agent: AgentId },
    #[error("expected {expected} groups (one per argument), found {found}")]
    GroupCount { expected: u32, found: usize },
    #[error("expected one synchronizer per group, found {found} for {groups} groups")]
    SynchronizerCount { groups: usize, found: usize },
    #[error("duplicate agent id {agent}")]
    DuplicateId { agent: AgentId },
}

/// A finite team: controllers, a partition of the agents into one group
/// per argument, and one designated synchronizer per group.
#[derive(Clone)]
pub struct Team {
    agents: Vec<Arc<dyn Controller>>,
    index: BTreeMap<AgentId, usize>,
    groups: Vec<Vec<AgentId>>,
    synchronizers: Vec<AgentId>,
    arity: u32,
}

impl Team {
    pub fn new(
        agents: Vec<Arc<dyn Controller>>,
        groups: Vec<Vec<AgentId>>,
        synchronizers: Vec<AgentId>,
        arity: u32,
    ) -> Result<Self, TeamError> {
        if agents.is_empty() {
            return Err(TeamError::Empty);
        }
        let mut index = BTreeMap::new();
        for (n, a) in agents.iter().enumerate() {
            if index.insert(a.id().clone(), n).is_some() {
                return Err(TeamError::DuplicateId {
                    agent: a.id().clone(),
                });
            }
        }
        if groups.len() != arity as usize {
            return Err(TeamError::GroupCount {
                expected: arity,
                found: groups.len(),
            });
        }
        let mut seen: BTreeSet<&AgentId> = BTreeSet::new();
        for (n, group) in groups.iter().enumerate() {
            if group.is_empty() {
                return Err(TeamError::EmptyGroup { index: n });
            }
            for id in group {
                if !index.contains_key(id) {
                    return Err(TeamError::UnknownAgent {
                        index: n,
                        agent: id.clone(),
                    });
                }
                if !seen.insert(id) {
                    return Err(TeamError::Overlap { agent: id.clone() });
                }
            }
        }
        for a in &agents {
            if !seen.contains(a.id()) {
                return Err(TeamError::Uncovered {
                    agent: a.id().clone(),
                });
            }
        }
        if synchronizers.len() != groups.len() {
            return Err(TeamError::SynchronizerCount {
                groups: groups.len(),
                found: synchronizers.len(),
            });
        }
        for (n, s) in synchronizers.iter().enumerate() {
            if !groups[n].contains(s) {
                return Err(TeamError::SynchronizerOutsideGroup {
                    index: n,
                    agent: s.clone(),
                });
            }
        }
        Ok(Team {
            agents,
            index,
            groups,
            synchronizers,
            arity,
        })
    }

    pub fn agents(&self) -> &[Arc<dyn Controller>] {
        &self.agents
    }

    pub fn agent(&self, id: &AgentId) -> Option<&Arc<dyn Controller>> {
        self.index.get(id).map(|&n| &self.agents[n])
    }

    pub fn agent_index(&self, id: &AgentId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn groups(&self) -> &[Vec<AgentId>] {
        &self.groups
    }

    pub fn synchronizers(&self) -> &[AgentId] {
        &self.synchronizers
    }

    pub fn arity(&self) -> u32 {
        self.arity
    }

    pub fn len(&self) -> usize {
        self.agents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.agents.is_empty()
    }

    /// Roster summary with stable field names, for golden tests and docs.
    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "arity": self.arity,
            "agents": self.agents.iter().map(|a| {
                serde_json::json!({
                    "id": a.id().to_string(),
                    "start": a.start_state().to_string(),
                })
            }).collect::<Vec<_>>(),
            "groups": self.groups.iter()
                .map(|g| g.iter().map(|id| id.to_string()).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "synchronizers": self.synchronizers.iter().map(|s| s.to_string()).collect::<Vec<_>>(),
        })
    }
}

impl fmt::Debug for Team {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Team")
            .field("arity", &self.arity)
            .field(
                "agents",
                &self.agents.iter().map(|a| a.id().clone()).collect::<Vec<_>>(),
            )
            .field("groups", &self.groups)
            .field("synchronizers", &self.synchronizers)
            .finish()
    }
}

/// True iff the reachable state sets of distinct agents intersect only in
/// `Stop`, computed by bounded enumeration of each controller.
pub fn slices_disjoint(team: &Team) -> Result<bool, EnumerationError> {
    slices_disjoint_capped(team, ENUMERATION_CAP)
}

pub fn slices_disjoint_capped(team: &Team, cap: usize) -> Result<bool, EnumerationError> {
    let mut seen: BTreeMap<AgentState, AgentId> = BTreeMap::new();
    for agent in team.agents() {
        let slice = agent.enumerate_states(cap)?;
        for state in slice {
            if state.is_stop() {
                continue;
            }
            if let Some(owner) = seen.get(&state) {
                if owner != agent.id() {
                    return Ok(false);
                }
            } else {
                seen.insert(state, agent.id().clone());
            }
        }
    }
    Ok(true)
}
