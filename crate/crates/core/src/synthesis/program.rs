//! Procedure programs and their interpreter.
//!
//! A controller is a short instruction list over a program counter plus a
//! bounded set of named tokens, which keeps every agent a finite-state
//! machine. Each round the interpreter resolves condition tests without
//! consuming the round, then performs exactly one round's worth of action:
//! a move, an idle wait, a visible token change, or one step of an inner
//! agent for composite controllers.
//!
//! Timing rules, fixed so that the whole team behaves as one flat Mealy
//! automaton per agent:
//!
//! * Conditions are tested before moving or waiting. A conditional walk
//!   whose target is already satisfied terminates on the spot, and
//!   `go-to-root` at the root is a no-op.
//! * `transit L` consumes a round and leaves the agent visible in `L` from
//!   the next round on, except immediately after a move, where the token
//!   change rides along with that move's round.
//! * Entering an inner computation consumes one round (the visible switch
//!   to the inner start state). When the inner agent would terminate, the
//!   composite instead continues past the instruction within that same
//!   round, so a following `transit` token replaces the inner terminal
//!   state exactly.

use crate::machine::{
    AgentId, AgentState, Controller, Degree, EnumerationError, Label, Move, Observation,
    StateSet, StepFault,
};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

/// Which component of a composite an inner computation follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseRole {
    H,
    G,
}

/// What a composite does when its inner agent would terminate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnStop {
    /// Fall through to the next instruction in the same round.
    Continue,
    /// Terminate the composite itself.
    Halt,
}

/// A guarded jump: taken when every listed (agent, token) is visible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arm {
    pub when: StateSet,
    pub goto: usize,
}

impl Arm {
    pub fn new(when: StateSet, goto: usize) -> Self {
        Arm { when, goto }
    }
}

#[derive(Clone)]
pub enum Instr {
    /// Go one step right.
    Push,
    /// Go one step left. Illegal at the root.
    MoveLeftOnce,
    /// Go left until the node has degree 1.
    GoToRoot,
    /// Become visible in the given token.
    Transit(Label),
    /// Wait here until some arm's condition is fully visible, then jump.
    /// Arms are tested in order.
    AwaitAny(Vec<Arm>),
    /// Go right until some arm's condition is fully visible, then jump.
    RightUntilAny(Vec<Arm>),
    /// Jump if the condition is visible right now; zero-cost either way.
    BranchIfSeen(StateSet, usize),
    /// Jump on the current node degree; zero-cost.
    BranchOnDegree { at_root: usize, interior: usize },
    /// Unconditional jump; zero-cost.
    Jump(usize),
    /// Run the inner agent, observing through the copy-set projection: an
    /// inner state is visible only when the partner tags observed for it
    /// form exactly one of the listed sets, i.e. every copy of its agent
    /// is colocated and showing it. The composite's own states are pair
    /// states wrapping the inner state and stamped with `tag`.
    ComputeInner {
        role: PhaseRole,
        inner: Arc<AgentProgram>,
        copy_sets: Arc<Vec<BTreeSet<AgentId>>>,
        tag: AgentId,
        on_stop: OnStop,
    },
    /// Transit to the shared terminal state.
    Stop,
}

impl fmt::Debug for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_instr(self))
    }
}

fn render_set(set: &StateSet) -> String {
    let items: Vec<String> = set.iter().map(|(a, l)| format!("({l},{a})")).collect();
    format!("{{{}}}", items.join(" "))
}

fn render_arms(arms: &[Arm]) -> String {
    arms.iter()
        .map(|arm| format!("{} -> {}", render_set(&arm.when), arm.goto))
        .collect::<Vec<_>>()
        .join(" | ")
}

/// One-line rendering used by plan listings.
pub fn render_instr(instr: &Instr) -> String {
    match instr {
        Instr::Push => "push".into(),
        Instr::MoveLeftOnce => "move-left-once".into(),
        Instr::GoToRoot => "go-to-root".into(),
        Instr::Transit(l) => format!("transit {l}"),
        Instr::AwaitAny(arms) => format!("wait-until {}", render_arms(arms)),
        Instr::RightUntilAny(arms) => format!("right-until {}", render_arms(arms)),
        Instr::BranchIfSeen(set, t) => format!("if-seen {} goto {t}", render_set(set)),
        Instr::BranchOnDegree { at_root, interior } => {
            format!("branch-degree root->{at_root} interior->{interior}")
        }
        Instr::Jump(t) => format!("goto {t}"),
        Instr::ComputeInner {
            role,
            inner,
            copy_sets,
            on_stop,
            ..
        } => {
            let role = match role {
                PhaseRole::H => "h",
                PhaseRole::G => "g",
            };
            let stop = match on_stop {
                OnStop::Continue => "continue",
                OnStop::Halt => "halt",
            };
            let copies: usize = copy_sets.iter().map(|s| s.len()).sum();
            format!(
                "compute-{role} inner={} copies={copies} on-stop={stop}",
                inner.id(),
            )
        }
        Instr::Stop => "stop".into(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ProgramError {
    #[error("agent {agent}: empty program")]
    Empty { agent: AgentId },
    #[error("agent {agent}: jump target {target} out of range at instruction {pc}")]
    BadTarget {
        agent: AgentId,
        pc: usize,
        target: usize,
    },
    #[error("agent {agent}: more than one compute-{role:?} instruction")]
    DuplicateInner { agent: AgentId, role: PhaseRole },
}

/// A compiled agent: its identity and instruction list.
#[derive(Debug, Clone)]
pub struct AgentProgram {
    id: AgentId,
    instrs: Vec<Instr>,
    ci_h: Option<usize>,
    ci_g: Option<usize>,
}

/// Zero-cost steps allowed per round before the interpreter declares a
/// control cycle. Generous: real programs resolve in a handful.
fn zero_cost_cap(len: usize) -> usize {
    4 * len + 16
}

impl AgentProgram {
    pub fn new(id: AgentId, instrs: Vec<Instr>) -> Result<Self, ProgramError> {
        if instrs.is_empty() {
            return Err(ProgramError::Empty { agent: id });
        }
        let len = instrs.len();
        let mut ci_h = None;
        let mut ci_g = None;
        for (pc, instr) in instrs.iter().enumerate() {
            let check = |target: usize| {
                if target >= len {
                    Err(ProgramError::BadTarget {
                        agent: id.clone(),
                        pc,
                        target,
                    })
                } else {
                    Ok(())
                }
            };
            match instr {
                Instr::AwaitAny(arms) | Instr::RightUntilAny(arms) => {
                    for arm in arms {
                        check(arm.goto)?;
                    }
                }
                Instr::BranchIfSeen(_, t) | Instr::Jump(t) => check(*t)?,
                Instr::BranchOnDegree { at_root, interior } => {
                    check(*at_root)?;
                    check(*interior)?;
                }
                Instr::ComputeInner { role, .. } => {
                    let slot = match role {
                        PhaseRole::H => &mut ci_h,
                        PhaseRole::G => &mut ci_g,
                    };
                    if slot.replace(pc).is_some() {
                        return Err(ProgramError::DuplicateInner {
                            agent: id.clone(),
                            role: *role,
                        });
                    }
                }
                _ => {}
            }
        }
        Ok(AgentProgram {
            id,
            instrs,
            ci_h,
            ci_g,
        })
    }

    pub fn instrs(&self) -> &[Instr] {
        &self.instrs
    }

    /// Program listing for plan output.
    pub fn listing(&self) -> Vec<String> {
        self.instrs
            .iter()
            .enumerate()
            .map(|(pc, i)| format!("{pc}: {}", render_instr(i)))
            .collect()
    }

    fn ci_at(&self, role: PhaseRole) -> Option<(usize, &Instr)> {
        let pc = match role {
            PhaseRole::H => self.ci_h?,
            PhaseRole::G => self.ci_g?,
        };
        Some((pc, &self.instrs[pc]))
    }

    /// Resolves the round's remaining control after an action consumed it:
    /// at most one following `transit` rides along, and landing on an inner
    /// computation enters it when `enter_ci` is set (used for the handover
    /// when an inner agent terminates, never after a plain move).
    fn settle(
        &self,
        mut pc: usize,
        mut label: Option<Label>,
        enter_ci: bool,
    ) -> Result<AgentState, StepFault> {
        if let Some(Instr::Transit(l)) = self.instrs.get(pc) {
            label = Some(*l);
            pc += 1;
        }
        if enter_ci {
            if let Some(Instr::ComputeInner { inner, tag, role, .. }) = self.instrs.get(pc) {
                return Ok(self.wrap_inner(*role, inner.start_state(), tag.clone()));
            }
        }
        match label {
            Some(label) => Ok(AgentState::named(self.id.clone(), label, pc as u32)),
            None => Err(StepFault::MissingLabel {
                agent: self.id.clone(),
            }),
        }
    }

    fn wrap_inner(&self, role: PhaseRole, inner: AgentState, tag: AgentId) -> AgentState {
        let inner = Box::new(inner);
        match role {
            PhaseRole::H => AgentState::PairH {
                inner,
                partner: tag,
            },
            PhaseRole::G => AgentState::PairG {
                inner,
                partner: tag,
            },
        }
    }

    fn run_from(&self, mut pc: usize, label: Label, obs: &Observation) -> Result<(AgentState, Move), StepFault> {
        let mut budget = zero_cost_cap(self.instrs.len());
        loop {
            if budget == 0 {
                return Err(StepFault::ZeroCostLoop {
                    agent: self.id.clone(),
                });
            }
            budget -= 1;
            let stay_here = |mv: Move| {
                Ok((
                    AgentState::named(self.id.clone(), label, pc as u32),
                    mv,
                ))
            };
            match &self.instrs[pc] {
                Instr::Jump(t) => pc = *t,
                Instr::BranchIfSeen(set, t) => {
                    pc = if obs.sees_all(set) { *t } else { pc + 1 };
                }
                Instr::BranchOnDegree { at_root, interior } => {
                    pc = match obs.degree {
                        Degree::Root => *at_root,
                        Degree::Interior => *interior,
                    };
                }
                Instr::GoToRoot => match obs.degree {
                    Degree::Root => pc += 1,
                    Degree::Interior => return stay_here(Move::Left),
                },
                Instr::AwaitAny(arms) => {
                    match arms.iter().find(|arm| obs.sees_all(&arm.when)) {
                        Some(arm) => pc = arm.goto,
                        None => return stay_here(Move::Stay),
                    }
                }
                Instr::RightUntilAny(arms) => {
                    match arms.iter().find(|arm| obs.sees_all(&arm.when)) {
                        Some(arm) => pc = arm.goto,
                        None => return stay_here(Move::Right),
                    }
                }
                Instr::Push => return Ok((self.settle(pc + 1, Some(label), false)?, Move::Right)),
                Instr::MoveLeftOnce => {
                    return Ok((self.settle(pc + 1, Some(label), false)?, Move::Left))
                }
                Instr::Transit(l) => {
                    return Ok((
                        AgentState::named(self.id.clone(), *l, pc as u32 + 1),
                        Move::Stay,
                    ))
                }
                Instr::ComputeInner { role, inner, tag, .. } => {
                    return Ok((
                        self.wrap_inner(*role, inner.start_state(), tag.clone()),
                        Move::Stay,
                    ))
                }
                Instr::Stop => return Ok((AgentState::Stop, Move::Stay)),
            }
        }
    }

    fn inner_phase_step(
        &self,
        role: PhaseRole,
        inner_state: &AgentState,
        partner: &AgentId,
        obs: &Observation,
    ) -> Result<(AgentState, Move), StepFault> {
        let (ci_pc, instr) = self.ci_at(role).ok_or_else(|| StepFault::ForeignState {
            agent: self.id.clone(),
            state: format!("pair state with no compute-{role:?} instruction"),
        })?;
        let (inner, copy_sets, on_stop) = match instr {
            Instr::ComputeInner {
                inner,
                copy_sets,
                on_stop,
                ..
            } => (inner, copy_sets, *on_stop),
            _ => unreachable!("ci_at returns ComputeInner"),
        };
        // All copies at a node share one projection; each observer hides
        // its own inner state via the exclusion slot.
        let key = (Arc::as_ptr(copy_sets) as usize, role as u8);
        let shared = obs.project_shared(key, |states| project(states, role, copy_sets));
        let inner_obs = Observation::new(obs.degree, shared, Some(inner_state.clone()));
        let (inner_next, mv) = inner.step(inner_state, &inner_obs)?;
        if inner_next.is_stop() {
            match on_stop {
                OnStop::Halt => Ok((AgentState::Stop, mv)),
                OnStop::Continue => Ok((self.settle(ci_pc + 1, None, true)?, mv)),
            }
        } else {
            Ok((self.wrap_inner(role, inner_next, partner.clone()), mv))
        }
    }
}

/// Projects a node's state set onto an inner agent's view. An inner state
/// is visible only if the partner tags observed for it form exactly one of
/// the copy sets, i.e. every copy of the state's agent is here showing
/// it. Distinct agents' copy sets are disjoint, so the equality test
/// identifies the right set, and a state with any copy missing matches
/// nothing. Requiring all copies also reproduces each inner agent's own
/// self-exclusion: an observer's copy of its own inner state is hidden
/// from its input, so that state falls one partner short in its view.
fn project(
    states: &BTreeSet<AgentState>,
    role: PhaseRole,
    copy_sets: &[BTreeSet<AgentId>],
) -> BTreeSet<AgentState> {
    let mut tally: BTreeMap<&AgentState, BTreeSet<AgentId>> = BTreeMap::new();
    for state in states {
        let (inner, partner) = match (role, state) {
            (PhaseRole::H, AgentState::PairH { inner, partner }) => (inner, partner),
            (PhaseRole::G, AgentState::PairG { inner, partner }) => (inner, partner),
            _ => continue,
        };
        tally.entry(inner).or_default().insert(partner.clone());
    }
    tally
        .into_iter()
        .filter(|(_, seen)| copy_sets.iter().any(|set| set == seen))
        .map(|(inner, _)| inner.clone())
        .collect()
}

impl Controller for AgentProgram {
    fn id(&self) -> &AgentId {
        &self.id
    }

    fn start_state(&self) -> AgentState {
        // A program whose first instruction is an inner computation starts
        // directly inside it (a composite's start state is the inner start
        // paired with the partner's name).
        if let Instr::ComputeInner { role, inner, tag, .. } = &self.instrs[0] {
            return self.wrap_inner(*role, inner.start_state(), tag.clone());
        }
        AgentState::named(self.id.clone(), Label::Init, 0)
    }

    fn step(&self, state: &AgentState, obs: &Observation) -> Result<(AgentState, Move), StepFault> {
        match state {
            AgentState::Stop => Ok((AgentState::Stop, Move::Stay)),
            AgentState::Named { agent, label, pc } => {
                debug_assert_eq!(agent, &self.id);
                self.run_from(*pc as usize, *label, obs)
            }
            AgentState::PairH { inner, partner } => {
                self.inner_phase_step(PhaseRole::H, inner, partner, obs)
            }
            AgentState::PairG { inner, partner } => {
                self.inner_phase_step(PhaseRole::G, inner, partner, obs)
            }
        }
    }

    fn owns(&self, state: &AgentState) -> bool {
        match state {
            AgentState::Stop => true,
            AgentState::Named { agent, .. } => agent == &self.id,
            AgentState::PairH { inner, partner } => match self.ci_at(PhaseRole::H) {
                Some((_, Instr::ComputeInner { inner: prog, tag, .. })) => {
                    partner == tag && prog.owns(inner)
                }
                _ => false,
            },
            AgentState::PairG { inner, partner } => match self.ci_at(PhaseRole::G) {
                Some((_, Instr::ComputeInner { inner: prog, tag, .. })) => {
                    partner == tag && prog.owns(inner)
                }
                _ => false,
            },
        }
    }

    fn enumerate_states(&self, cap: usize) -> Result<BTreeSet<AgentState>, EnumerationError> {
        let mut memo = BTreeMap::new();
        enumerate_program(self, cap, &mut memo)
    }
}

/// Seeds for the structural walk: a round-boundary control point, or an
/// entered inner computation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Seed {
    At(usize, Label),
    Inner(usize),
}

/// Enumerates every state the interpreter can end a round in, branching on
/// all possible condition outcomes. Independent of the team's inputs; the
/// result over-approximates the run-reachable set and is identical every
/// time the same program is enumerated.
fn enumerate_program(
    prog: &AgentProgram,
    cap: usize,
    memo: &mut BTreeMap<*const AgentProgram, BTreeSet<AgentState>>,
) -> Result<BTreeSet<AgentState>, EnumerationError> {
    let mut states: BTreeSet<AgentState> = BTreeSet::new();
    let mut seeds: BTreeSet<Seed> = BTreeSet::new();
    let mut work: Vec<Seed> = Vec::new();

    let add_state =
        |states: &mut BTreeSet<AgentState>, s: AgentState| -> Result<(), EnumerationError> {
            if states.len() >= cap {
                return Err(EnumerationError::CapExceeded {
                    agent: prog.id.clone(),
                    cap,
                });
            }
            states.insert(s);
            Ok(())
        };

    let push_seed = |seeds: &mut BTreeSet<Seed>, work: &mut Vec<Seed>, seed: Seed| {
        if seeds.insert(seed.clone()) {
            work.push(seed);
        }
    };

    // Seed with the start state.
    match &prog.instrs[0] {
        Instr::ComputeInner { .. } => push_seed(&mut seeds, &mut work, Seed::Inner(0)),
        _ => push_seed(&mut seeds, &mut work, Seed::At(0, Label::Init)),
    }

    while let Some(seed) = work.pop() {
        match seed {
            Seed::At(pc, label) => {
                add_state(
                    &mut states,
                    AgentState::named(prog.id.clone(), label, pc as u32),
                )?;
                // Explore all round outcomes from this control point.
                let mut visited = BTreeSet::new();
                let mut frontier = vec![pc];
                while let Some(pc) = frontier.pop() {
                    if !visited.insert(pc) {
                        continue;
                    }
                    match &prog.instrs[pc] {
                        Instr::Jump(t) => frontier.push(*t),
                        Instr::BranchIfSeen(_, t) => {
                            frontier.push(*t);
                            frontier.push(pc + 1);
                        }
                        Instr::BranchOnDegree { at_root, interior } => {
                            frontier.push(*at_root);
                            frontier.push(*interior);
                        }
                        Instr::GoToRoot => {
                            // Still walking: self state at this pc.
                            push_seed(&mut seeds, &mut work, Seed::At(pc, label));
                            frontier.push(pc + 1);
                        }
                        Instr::AwaitAny(arms) | Instr::RightUntilAny(arms) => {
                            push_seed(&mut seeds, &mut work, Seed::At(pc, label));
                            for arm in arms {
                                frontier.push(arm.goto);
                            }
                        }
                        Instr::Push | Instr::MoveLeftOnce => {
                            // Action; at most one transit rides along.
                            match prog.instrs.get(pc + 1) {
                                Some(Instr::Transit(l)) => {
                                    push_seed(&mut seeds, &mut work, Seed::At(pc + 2, *l))
                                }
                                _ => push_seed(&mut seeds, &mut work, Seed::At(pc + 1, label)),
                            }
                        }
                        Instr::Transit(l) => {
                            push_seed(&mut seeds, &mut work, Seed::At(pc + 1, *l));
                        }
                        Instr::ComputeInner { .. } => {
                            push_seed(&mut seeds, &mut work, Seed::Inner(pc));
                        }
                        Instr::Stop => {}
                    }
                }
            }
            Seed::Inner(ci_pc) => {
                let (inner, tag, role, on_stop) = match &prog.instrs[ci_pc] {
                    Instr::ComputeInner {
                        inner,
                        tag,
                        role,
                        on_stop,
                        ..
                    } => (inner.clone(), tag.clone(), *role, *on_stop),
                    _ => unreachable!("Seed::Inner points at ComputeInner"),
                };
                let key = Arc::as_ptr(&inner);
                if !memo.contains_key(&key) {
                    let inner_states = enumerate_program(&inner, cap, memo)?;
                    memo.insert(key, inner_states);
                }
                for inner_state in memo[&key].clone() {
                    let wrapped = match role {
                        PhaseRole::H => AgentState::PairH {
                            inner: Box::new(inner_state),
                            partner: tag.clone(),
                        },
                        PhaseRole::G => AgentState::PairG {
                            inner: Box::new(inner_state),
                            partner: tag.clone(),
                        },
                    };
                    add_state(&mut states, wrapped)?;
                }
                // Continuation after the inner agent terminates.
                if on_stop == OnStop::Continue {
                    let mut pc = ci_pc + 1;
                    let mut label = None;
                    if let Some(Instr::Transit(l)) = prog.instrs.get(pc) {
                        label = Some(*l);
                        pc += 1;
                    }
                    match (prog.instrs.get(pc), label) {
                        (Some(Instr::ComputeInner { .. }), _) => {
                            push_seed(&mut seeds, &mut work, Seed::Inner(pc))
                        }
                        (_, Some(l)) => push_seed(&mut seeds, &mut work, Seed::At(pc, l)),
                        // No token available: the interpreter would fault;
                        // nothing to enumerate.
                        (_, None) => {}
                    }
                }
            }
        }
    }
    Ok(states)
}
