//! Teams for the three basic functions.
//!
//! Each team is instantiated with the minimum agents the constructions
//! need; the enclosing product constructions only require non-emptiness,
//! and small ingredient teams keep composite state spaces small.

use super::program::{AgentProgram, Arm, Instr};
use super::{CompileError, Provenance, SubTeam};
use crate::machine::{AgentId, Label, StateSet};
use crate::prf::PrfExpr;
use std::collections::BTreeMap;
use std::sync::Arc;

fn single(id: &AgentId, label: Label) -> StateSet {
    [(id.clone(), label)].into()
}

/// One agent that walks to the root and stops there.
pub fn compile_zero(path: &str) -> SubTeam {
    let id = AgentId::new(format!("{path}.z"));
    let program = AgentProgram::new(id.clone(), vec![Instr::GoToRoot, Instr::Stop])
        .expect("static program");
    SubTeam {
        agents: vec![Arc::new(program)],
        groups: vec![vec![id.clone()]],
        synchronizers: vec![id.clone()],
        arity: 1,
        provenance: [(id, Provenance::ZeroAgent)].into(),
    }
}

/// Two agents at the argument. Both push and stop when they start at the
/// root. Otherwise the marker pushes one node right and waits as a beacon
/// while the lead visits the root (the synchronization) and walks back out
/// to it; seeing the lead reach, both stop together.
pub fn compile_succ(path: &str) -> SubTeam {
    let a = AgentId::new(format!("{path}.a"));
    let b = AgentId::new(format!("{path}.b"));

    let lead = AgentProgram::new(
        a.clone(),
        vec![
            Instr::BranchOnDegree {
                at_root: 1,
                interior: 3,
            },
            Instr::Push,
            Instr::Stop,
            Instr::GoToRoot,
            Instr::RightUntilAny(vec![Arm::new(single(&b, Label::Wait), 5)]),
            Instr::Transit(Label::Reached),
            Instr::Stop,
        ],
    )
    .expect("static program");

    let marker = AgentProgram::new(
        b.clone(),
        vec![
            Instr::BranchOnDegree {
                at_root: 1,
                interior: 3,
            },
            Instr::Push,
            Instr::Stop,
            Instr::Push,
            Instr::Transit(Label::Wait),
            Instr::AwaitAny(vec![Arm::new(single(&a, Label::Reached), 6)]),
            Instr::Stop,
        ],
    )
    .expect("static program");

    SubTeam {
        agents: vec![Arc::new(lead), Arc::new(marker)],
        groups: vec![vec![a.clone(), b.clone()]],
        synchronizers: vec![a.clone()],
        arity: 1,
        provenance: [(a, Provenance::SuccLead), (b, Provenance::SuccMarker)].into(),
    }
}

/// One walker per group plus a marker at the selected argument. Walkers
/// gather at the root (the synchronization), then walk out together to the
/// marker's beacon; everyone stops there.
pub fn compile_proj(path: &str, k: u32, i: u32) -> Result<SubTeam, CompileError> {
    // Re-uses the expression-level validation for the (k, i) range.
    PrfExpr::proj(k, i)?;
    let walkers: Vec<AgentId> = (1..=k)
        .map(|j| AgentId::new(format!("{path}.t{j}")))
        .collect();
    let marker = AgentId::new(format!("{path}.b"));

    let all_waiting: StateSet = walkers.iter().map(|t| (t.clone(), Label::Wait)).collect();
    let all_reached: StateSet = walkers
        .iter()
        .map(|t| (t.clone(), Label::Reached))
        .collect();

    let mut agents = Vec::with_capacity(k as usize + 1);
    let mut provenance = BTreeMap::new();
    for (n, t) in walkers.iter().enumerate() {
        let mut others = all_waiting.clone();
        others.remove(&(t.clone(), Label::Wait));
        let program = AgentProgram::new(
            t.clone(),
            vec![
                Instr::GoToRoot,
                Instr::Transit(Label::Wait),
                Instr::AwaitAny(vec![Arm::new(others, 3)]),
                Instr::RightUntilAny(vec![Arm::new(single(&marker, Label::Wait), 4)]),
                Instr::Transit(Label::Reached),
                Instr::Stop,
            ],
        )
        .expect("static program");
        agents.push(Arc::new(program));
        provenance.insert(
            t.clone(),
            Provenance::ProjWalker {
                group: n as u32 + 1,
            },
        );
    }
    let marker_program = AgentProgram::new(
        marker.clone(),
        vec![
            Instr::Transit(Label::Wait),
            Instr::AwaitAny(vec![Arm::new(all_reached, 2)]),
            Instr::Stop,
        ],
    )
    .expect("static program");
    agents.push(Arc::new(marker_program));
    provenance.insert(marker.clone(), Provenance::ProjMarker { target: i });

    let mut groups: Vec<Vec<AgentId>> = walkers.iter().map(|t| vec![t.clone()]).collect();
    groups[i as usize - 1].push(marker);

    Ok(SubTeam {
        agents,
        groups,
        synchronizers: walkers,
        arity: k,
        provenance,
    })
}
