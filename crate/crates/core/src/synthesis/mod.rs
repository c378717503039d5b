//! The compiler: expressions to teams.
//!
//! Basic functions get hand-built teams. Composition pairs each agent of
//! an inner team with the matching-group agents of the outer team into
//! product-state composites. Primitive recursion adds argument holders, a
//! counter and a conductor around its composites and re-runs the step
//! function once per phase.

mod basic;
mod compose;
mod primrec;
pub mod program;

pub use basic::{compile_proj, compile_succ, compile_zero};
pub use compose::compile_compose;
pub use primrec::compile_primrec;
pub use program::{AgentProgram, Arm, Instr, OnStop, PhaseRole, ProgramError};

use crate::machine::{
    slices_disjoint, AgentId, Controller, EnumerationError, Team, TeamError, ENUMERATION_CAP,
};
use crate::prf::{ExprError, PrfExpr};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Recursion composite classes, by the partner's group in the step team:
/// argument seats (`B`), the phase-index seat (`C`), the previous-value
/// seat (`D`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RecClass {
    B,
    C,
    D,
}

impl fmt::Display for RecClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RecClass::B => write!(f, "B"),
            RecClass::C => write!(f, "C"),
            RecClass::D => write!(f, "D"),
        }
    }
}

/// Which role an agent plays in its team.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    /// The single agent of a zero team.
    ZeroAgent,
    /// Successor team agent that fetches the synchronization at the root.
    SuccLead,
    /// Successor team agent that marks the target node.
    SuccMarker,
    /// Projection team agent that gathers at the root; one per group.
    ProjWalker { group: u32 },
    /// Projection team agent that marks the selected argument.
    ProjMarker { target: u32 },
    /// Composition composite c(a, b).
    CompositionPair { a: AgentId, b: AgentId },
    /// Recursion composite d(a, b).
    RecursionPair {
        a: AgentId,
        b: AgentId,
        class: RecClass,
    },
    /// Argument holder q_i.
    ArgumentHolder { index: u32 },
    /// The recursion counter.
    Counter,
    /// The recursion conductor.
    Conductor,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::ZeroAgent => write!(f, "zero agent"),
            Provenance::SuccLead => write!(f, "successor lead (A)"),
            Provenance::SuccMarker => write!(f, "successor marker (B)"),
            Provenance::ProjWalker { group } => write!(f, "projection walker, group {group}"),
            Provenance::ProjMarker { target } => write!(f, "projection marker at x_{target}"),
            Provenance::CompositionPair { a, b } => write!(f, "composite c({a}, {b})"),
            Provenance::RecursionPair { a, b, class } => {
                write!(f, "composite d({a}, {b}) in {class}")
            }
            Provenance::ArgumentHolder { index } => write!(f, "argument holder q{index}"),
            Provenance::Counter => write!(f, "counter"),
            Provenance::Conductor => write!(f, "conductor"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CompileError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Team(#[from] TeamError),
    #[error(transparent)]
    Program(#[from] ProgramError),
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
    #[error("compiled team has overlapping state slices")]
    SlicesOverlap,
    #[error("composition ingredient teams disagree on arity: {0} vs {1}")]
    IngredientArity(u32, u32),
}

/// A team under construction: concrete programs plus the grouping,
/// synchronizer and provenance bookkeeping the enclosing builders need.
#[derive(Debug, Clone)]
pub struct SubTeam {
    pub agents: Vec<Arc<AgentProgram>>,
    pub groups: Vec<Vec<AgentId>>,
    pub synchronizers: Vec<AgentId>,
    pub arity: u32,
    pub provenance: BTreeMap<AgentId, Provenance>,
}

impl SubTeam {
    pub fn agent(&self, id: &AgentId) -> Option<&Arc<AgentProgram>> {
        self.agents.iter().find(|a| a.id() == id)
    }

    /// 1-based group index of an agent.
    pub fn group_of(&self, id: &AgentId) -> Option<u32> {
        self.groups
            .iter()
            .position(|g| g.contains(id))
            .map(|n| n as u32 + 1)
    }

    pub fn agent_ids(&self) -> Vec<AgentId> {
        self.agents.iter().map(|a| a.id().clone()).collect()
    }

    /// Finalizes into a runnable team.
    pub fn into_team(self) -> Result<(Team, BTreeMap<AgentId, Provenance>), TeamError> {
        let agents: Vec<Arc<dyn Controller>> = self
            .agents
            .into_iter()
            .map(|a| a as Arc<dyn Controller>)
            .collect();
        let team = Team::new(agents, self.groups, self.synchronizers, self.arity)?;
        Ok((team, self.provenance))
    }
}

/// A compiled expression: the team plus per-agent provenance. The concrete
/// programs are kept alongside the type-erased team so plan listings stay
/// available.
#[derive(Debug, Clone)]
pub struct SynthPlan {
    pub expr: PrfExpr,
    pub team: Team,
    pub provenance: BTreeMap<AgentId, Provenance>,
    programs: BTreeMap<AgentId, Arc<AgentProgram>>,
}

impl SynthPlan {
    /// Structured plan document: roster, groups, synchronizers, provenance
    /// and per-agent program listings. Stable for golden tests.
    pub fn to_json(&self) -> Result<serde_json::Value, EnumerationError> {
        let mut agents = Vec::new();
        for (n, agent) in self.team.agents().iter().enumerate() {
            let group = self
                .team
                .groups()
                .iter()
                .position(|g| g.contains(agent.id()))
                .map(|i| i + 1)
                .unwrap_or(0);
            let states = agent.enumerate_states(ENUMERATION_CAP)?.len();
            let provenance = self
                .provenance
                .get(agent.id())
                .map(|p| p.to_string())
                .unwrap_or_default();
            let listing = self
                .plan_program(agent.id())
                .unwrap_or_default();
            agents.push(serde_json::json!({
                "index": n,
                "id": agent.id().to_string(),
                "group": group,
                "role": provenance,
                "start": agent.start_state().to_string(),
                "reachable_states": states,
                "program": listing,
            }));
        }
        Ok(serde_json::json!({
            "expression": self.expr.to_string(),
            "arity": self.team.arity(),
            "agents": agents,
            "groups": self.team.groups().iter()
                .map(|g| g.iter().map(|id| id.to_string()).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
            "synchronizers": self.team.synchronizers().iter()
                .map(|s| s.to_string()).collect::<Vec<_>>(),
        }))
    }

    fn plan_program(&self, id: &AgentId) -> Option<Vec<String>> {
        // Controllers are always AgentPrograms built by this module; the
        // listing is re-derived from the provenance-side copy.
        self.programs.get(id).map(|p| p.listing())
    }

    /// Total number of agents.
    pub fn agent_count(&self) -> usize {
        self.team.len()
    }

    /// The concrete program behind an agent.
    pub fn program(&self, id: &AgentId) -> Option<&Arc<AgentProgram>> {
        self.programs.get(id)
    }
}

/// Compiles an expression into a team by structural recursion, verifying
/// slice disjointness of the result.
pub fn compile(expr: &PrfExpr) -> Result<SynthPlan, CompileError> {
    expr.validate()?;
    let built = build(expr, "f")?;
    let programs: BTreeMap<AgentId, Arc<AgentProgram>> = built
        .agents
        .iter()
        .map(|a| (a.id().clone(), a.clone()))
        .collect();
    let (team, provenance) = built.into_team()?;
    if !slices_disjoint(&team)? {
        return Err(CompileError::SlicesOverlap);
    }
    Ok(SynthPlan {
        expr: expr.clone(),
        team,
        provenance,
        programs,
    })
}

/// Structural recursion over the expression, prefixing sub-team agent
/// names with their path so nested teams never collide.
pub fn build(expr: &PrfExpr, path: &str) -> Result<SubTeam, CompileError> {
    match expr {
        PrfExpr::Zero => Ok(compile_zero(path)),
        PrfExpr::Succ => Ok(compile_succ(path)),
        PrfExpr::Proj { k, i } => compile_proj(path, *k, *i),
        PrfExpr::Compose { g, hs } => {
            let g_team = build(g, &format!("{path}.g"))?;
            let mut h_teams = Vec::with_capacity(hs.len());
            for (j, h) in hs.iter().enumerate() {
                h_teams.push(build(h, &format!("{path}.h{}", j + 1))?);
            }
            compile_compose(path, g_team, h_teams)
        }
        PrfExpr::PrimRec { h, g } => {
            let h_team = build(h, &format!("{path}.h"))?;
            let g_team = build(g, &format!("{path}.g"))?;
            compile_primrec(path, h_team, g_team)
        }
    }
}
