//! Composition of teams.
//!
//! Every agent `a` of inner team `h_j` is paired with every agent `b` of
//! the outer team's group `j` into a composite `c(a, b)` that starts at
//! `a`'s location, tracks `a` until `h_j` finishes (which happens at the
//! node carrying `h_j`'s value, exactly where a group-`j` agent of the
//! outer team must start), then tracks `b`.
//!
//! Pairing by matching group is what places every copy of `b` at the
//! argument node its group expects; it also sizes the partner sets of the
//! observation projections: an inner state is visible only when all of its
//! agent's copies show it, which reproduces each inner agent's view
//! exactly, including self-exclusion.

use super::program::{AgentProgram, Instr, OnStop, PhaseRole};
use super::{CompileError, Provenance, SubTeam};
use crate::machine::{AgentId, Controller};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

pub fn compile_compose(
    path: &str,
    g_team: SubTeam,
    h_teams: Vec<SubTeam>,
) -> Result<SubTeam, CompileError> {
    assert_eq!(
        g_team.arity as usize,
        h_teams.len(),
        "outer team arity must match the number of inner teams"
    );
    let arity = h_teams[0].arity;
    for h in &h_teams {
        if h.arity != arity {
            return Err(CompileError::IngredientArity(arity, h.arity));
        }
    }

    let mut agents = Vec::new();
    let mut provenance = BTreeMap::new();
    let mut groups: Vec<Vec<AgentId>> = vec![Vec::new(); arity as usize];
    // (a, b) -> composite id, for synchronizer lookup.
    let mut pair_ids: BTreeMap<(AgentId, AgentId), AgentId> = BTreeMap::new();

    // During the first phase the copies of an inner agent of team j are
    // tagged with the outer group j; during the second, the copies of an
    // outer agent of group j are tagged with the whole inner team j.
    let g_copy_sets: Arc<Vec<BTreeSet<AgentId>>> = Arc::new(
        h_teams
            .iter()
            .map(|h| h.agent_ids().into_iter().collect())
            .collect(),
    );

    let mut counter = 0usize;
    for (j, h_team) in h_teams.iter().enumerate() {
        let outer_group = &g_team.groups[j];
        let h_copy_sets: Arc<Vec<BTreeSet<AgentId>>> =
            Arc::new(vec![outer_group.iter().cloned().collect()]);
        for a in &h_team.agents {
            let a_group = h_team
                .group_of(a.id())
                .expect("ingredient team covers its agents") as usize
                - 1;
            for b_id in outer_group {
                let b = g_team.agent(b_id).expect("group lists team agents");
                let id = AgentId::new(format!("{path}.c{counter}"));
                counter += 1;
                let program = AgentProgram::new(
                    id.clone(),
                    vec![
                        Instr::ComputeInner {
                            role: PhaseRole::H,
                            inner: a.clone(),
                            copy_sets: h_copy_sets.clone(),
                            tag: b_id.clone(),
                            on_stop: OnStop::Continue,
                        },
                        Instr::ComputeInner {
                            role: PhaseRole::G,
                            inner: b.clone(),
                            copy_sets: g_copy_sets.clone(),
                            tag: a.id().clone(),
                            on_stop: OnStop::Halt,
                        },
                    ],
                )?;
                groups[a_group].push(id.clone());
                pair_ids.insert((a.id().clone(), b_id.clone()), id.clone());
                provenance.insert(
                    id.clone(),
                    Provenance::CompositionPair {
                        a: a.id().clone(),
                        b: b_id.clone(),
                    },
                );
                agents.push(Arc::new(program));
            }
        }
    }

    // Synchronizers: the copies of h_1's synchronizers paired with the
    // outer team's first-group synchronizer; the synchronization round of
    // h_1's embedded run serves the whole composition.
    let fixed_b = g_team.synchronizers[0].clone();
    let synchronizers = h_teams[0]
        .synchronizers
        .iter()
        .map(|a| pair_ids[&(a.clone(), fixed_b.clone())].clone())
        .collect();

    Ok(SubTeam {
        agents,
        groups,
        synchronizers,
        arity,
        provenance,
    })
}
