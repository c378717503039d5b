//! Primitive recursion of teams.
//!
//! For `f(x_1..x_k, y) = primrec(h, g)` the team has four kinds of agents:
//!
//! * composites `d(a, b)` for every `a` in the base team and `b` in the
//!   step team, classified by `b`'s group: `B` (argument seats 1..k),
//!   `C` (the phase-index seat k+1), `D` (the previous-value seat k+2);
//! * argument holders `q_1..q_k` at the arguments and `q_{k+1}` at the
//!   last argument, staying put as positional beacons;
//! * a counter whose node number is the current phase;
//! * a conductor that drives the phases by broadcast tokens.
//!
//! Phase 0 computes `h`. Each later phase re-seats the composites (B at
//! `x_i` via the holder beacons, C one node left of the counter, D in
//! place on the previous value) and re-runs `g`. The counter moves one
//! node right per phase; landing on the holder of the last argument tells
//! it the current phase is the last. A last argument of zero is detected
//! at the root before the counter's first push, skipping every step phase
//! so the result is the base value.

use super::program::{AgentProgram, Arm, Instr, OnStop, PhaseRole};
use super::{CompileError, Provenance, RecClass, SubTeam};
use crate::machine::{AgentId, Controller, Label, StateSet};
use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

fn single(id: &AgentId, label: Label) -> StateSet {
    [(id.clone(), label)].into()
}

pub fn compile_primrec(
    path: &str,
    h_team: SubTeam,
    g_team: SubTeam,
) -> Result<SubTeam, CompileError> {
    let k = h_team.arity;
    assert_eq!(
        g_team.arity,
        k + 2,
        "step team arity must be base arity plus two"
    );

    let conductor = AgentId::new(format!("{path}.cond"));
    let counter = AgentId::new(format!("{path}.cnt"));
    let holders: Vec<AgentId> = (1..=k + 1)
        .map(|i| AgentId::new(format!("{path}.q{i}")))
        .collect();

    // Composite roster and classification.
    struct Pair {
        id: AgentId,
        a: Arc<AgentProgram>,
        b: Arc<AgentProgram>,
        a_group: u32,
        b_group: u32,
        class: RecClass,
    }
    let mut pairs = Vec::new();
    for a in &h_team.agents {
        let a_group = h_team.group_of(a.id()).expect("covered");
        for b in &g_team.agents {
            let b_group = g_team.group_of(b.id()).expect("covered");
            let class = if b_group <= k {
                RecClass::B
            } else if b_group == k + 1 {
                RecClass::C
            } else {
                RecClass::D
            };
            pairs.push(Pair {
                id: AgentId::new(format!("{path}.d{}", pairs.len())),
                a: a.clone(),
                b: b.clone(),
                a_group,
                b_group,
                class,
            });
        }
    }

    let begin_all: StateSet = pairs.iter().map(|p| (p.id.clone(), Label::Begin)).collect();
    let end_phase_bc: StateSet = pairs
        .iter()
        .filter(|p| p.class != RecClass::D)
        .map(|p| (p.id.clone(), Label::EndPhase))
        .collect();
    let end_phase_d: StateSet = pairs
        .iter()
        .filter(|p| p.class == RecClass::D)
        .map(|p| (p.id.clone(), Label::EndPhase))
        .collect();
    // Every (a, b) pair exists, so copies of a base agent are tagged with
    // the whole step team and copies of a step agent with the whole base
    // team.
    let h_copy_sets: Arc<Vec<BTreeSet<AgentId>>> =
        Arc::new(vec![g_team.agent_ids().into_iter().collect()]);
    let g_copy_sets: Arc<Vec<BTreeSet<AgentId>>> =
        Arc::new(vec![h_team.agent_ids().into_iter().collect()]);

    let mut agents: Vec<Arc<AgentProgram>> = Vec::new();
    let mut provenance = BTreeMap::new();

    // Composites.
    for pair in &pairs {
        let seat_h = single(&holders[pair.a_group as usize - 1], Label::Wait);
        let compute_h = Instr::ComputeInner {
            role: PhaseRole::H,
            inner: pair.a.clone(),
            copy_sets: h_copy_sets.clone(),
            tag: pair.b.id().clone(),
            on_stop: OnStop::Continue,
        };
        let compute_g = Instr::ComputeInner {
            role: PhaseRole::G,
            inner: pair.b.clone(),
            copy_sets: g_copy_sets.clone(),
            tag: pair.a.id().clone(),
            on_stop: OnStop::Continue,
        };
        let instrs = match pair.class {
            RecClass::B | RecClass::C => {
                let mut v = vec![
                    Instr::GoToRoot,                                                   // 0
                    Instr::Transit(Label::Begin),                                      // 1
                    Instr::AwaitAny(vec![Arm::new(single(&conductor, Label::Start), 3)]), // 2
                    Instr::RightUntilAny(vec![Arm::new(seat_h, 4)]),                   // 3
                    compute_h,                                                         // 4
                    Instr::Transit(Label::Computed),                                   // 5
                    Instr::GoToRoot,                                                   // 6
                    Instr::Transit(Label::EndPhase),                                   // 7
                ];
                // 8: phase dispatch; exit on gather, run a phase on coord.
                let body = 9;
                let (after_seat, exit);
                match pair.class {
                    RecClass::B => {
                        after_seat = body + 1;
                        exit = after_seat + 5;
                        v.push(Instr::AwaitAny(vec![
                            Arm::new(single(&conductor, Label::Gather), exit),
                            Arm::new(single(&conductor, Label::Coord), body),
                        ]));
                        v.push(Instr::RightUntilAny(vec![Arm::new(
                            single(&holders[pair.b_group as usize - 1], Label::Wait),
                            after_seat,
                        )]));
                    }
                    RecClass::C => {
                        after_seat = body + 2;
                        exit = after_seat + 5;
                        v.push(Instr::AwaitAny(vec![
                            Arm::new(single(&conductor, Label::Gather), exit),
                            Arm::new(single(&conductor, Label::Coord), body),
                        ]));
                        v.push(Instr::RightUntilAny(vec![
                            Arm::new(single(&counter, Label::Count), body + 1),
                            Arm::new(single(&counter, Label::LastPhase), body + 1),
                        ]));
                        v.push(Instr::MoveLeftOnce);
                    }
                    RecClass::D => unreachable!(),
                }
                v.push(compute_g);                                   // after_seat
                v.push(Instr::Transit(Label::Computed));              // +1
                v.push(Instr::GoToRoot);                              // +2
                v.push(Instr::Transit(Label::EndPhase));              // +3
                v.push(Instr::Jump(8));                               // +4
                debug_assert_eq!(v.len(), exit);
                v.push(Instr::RightUntilAny(vec![Arm::new(end_phase_d.clone(), exit + 1)]));
                v.push(Instr::AwaitAny(vec![Arm::new(
                    single(&conductor, Label::EndComputation),
                    exit + 2,
                )]));
                v.push(Instr::Stop);
                v
            }
            RecClass::D => vec![
                Instr::GoToRoot,                                                   // 0
                Instr::Transit(Label::Begin),                                      // 1
                Instr::AwaitAny(vec![Arm::new(single(&conductor, Label::Start), 3)]), // 2
                Instr::RightUntilAny(vec![Arm::new(seat_h, 4)]),                   // 3
                compute_h,                                                         // 4
                Instr::Transit(Label::Computed),                                   // 5
                Instr::Transit(Label::EndPhase),                                   // 6
                Instr::AwaitAny(vec![
                    Arm::new(single(&conductor, Label::EndComputation), 12),
                    Arm::new(single(&conductor, Label::Step), 8),
                ]),                                                                // 7
                compute_g,                                                         // 8
                Instr::Transit(Label::Computed),                                   // 9
                Instr::Transit(Label::EndPhase),                                   // 10
                Instr::Jump(7),                                                    // 11
                Instr::Stop,                                                       // 12
            ],
        };
        agents.push(Arc::new(AgentProgram::new(pair.id.clone(), instrs)?));
        provenance.insert(
            pair.id.clone(),
            Provenance::RecursionPair {
                a: pair.a.id().clone(),
                b: pair.b.id().clone(),
                class: pair.class,
            },
        );
    }

    // Argument holders. The holder of the last argument additionally waits
    // at the root for the gather token: its release happens mid-phase,
    // before the final value's node is marked.
    for (n, q) in holders.iter().enumerate() {
        let index = n as u32 + 1;
        let mut v = vec![
            Instr::Transit(Label::Wait),
            Instr::AwaitAny(vec![Arm::new(single(&conductor, Label::Finish(index)), 2)]),
            Instr::GoToRoot,
        ];
        if index == k + 1 {
            v.push(Instr::AwaitAny(vec![Arm::new(
                single(&conductor, Label::Gather),
                4,
            )]));
        }
        let at = v.len();
        v.push(Instr::RightUntilAny(vec![Arm::new(end_phase_d.clone(), at + 1)]));
        v.push(Instr::AwaitAny(vec![Arm::new(
            single(&conductor, Label::EndComputation),
            at + 2,
        )]));
        v.push(Instr::Stop);
        agents.push(Arc::new(AgentProgram::new(q.clone(), v)?));
        provenance.insert(q.clone(), Provenance::ArgumentHolder { index });
    }

    // Counter: one push per phase, waiting for the conductor's increase
    // token between pushes. Landing on the last argument's holder flips it
    // to lastPhase; seeing that holder at the root before the first push
    // means the last argument is zero and there are no step phases at all.
    let q_last = single(&holders[k as usize], Label::Wait);
    {
        let v = vec![
            Instr::GoToRoot,                                                       // 0
            Instr::AwaitAny(vec![Arm::new(single(&conductor, Label::Start), 2)]),  // 1
            Instr::BranchIfSeen(q_last.clone(), 9),                                // 2
            Instr::Push,                                                           // 3
            Instr::BranchIfSeen(q_last.clone(), 9),                                // 4
            Instr::Transit(Label::Count),                                          // 5
            Instr::AwaitAny(vec![Arm::new(single(&conductor, Label::Increase), 7)]), // 6
            Instr::Push,                                                           // 7
            Instr::Jump(4),                                                        // 8
            Instr::Transit(Label::LastPhase),                                      // 9
            Instr::AwaitAny(vec![Arm::new(single(&conductor, Label::Finish(k + 1)), 11)]), // 10
            Instr::GoToRoot,                                                       // 11
            Instr::AwaitAny(vec![Arm::new(single(&conductor, Label::Gather), 13)]), // 12
            Instr::RightUntilAny(vec![Arm::new(end_phase_d.clone(), 14)]),         // 13
            Instr::AwaitAny(vec![Arm::new(single(&conductor, Label::EndComputation), 15)]), // 14
            Instr::Stop,                                                           // 15
        ];
        agents.push(Arc::new(AgentProgram::new(counter.clone(), v)?));
        provenance.insert(counter.clone(), Provenance::Counter);
    }

    // Conductor. Phase dispatch waits at the root for all B and C
    // composites home in endPhase; seeing the counter there in lastPhase
    // at the same time means the last argument was zero and the phases are
    // skipped entirely.
    {
        let mut zero_case = end_phase_bc.clone();
        zero_case.insert((counter.clone(), Label::LastPhase));
        let fin = 12;
        let mut v = vec![
            Instr::GoToRoot,                                                     // 0
            Instr::AwaitAny(vec![Arm::new(begin_all.clone(), 2)]),               // 1
            Instr::Transit(Label::Start),                                        // 2
            Instr::AwaitAny(vec![
                Arm::new(zero_case, fin),
                Arm::new(end_phase_bc.clone(), 4),
            ]),                                                                  // 3
            Instr::Transit(Label::Coord),                                        // 4
            Instr::RightUntilAny(vec![Arm::new(end_phase_d.clone(), 6)]),        // 5
            Instr::Transit(Label::Step),                                         // 6
            Instr::GoToRoot,                                                     // 7
            Instr::RightUntilAny(vec![
                Arm::new(single(&counter, Label::Count), 9),
                Arm::new(single(&counter, Label::LastPhase), fin),
            ]),                                                                  // 8
            Instr::Transit(Label::Increase),                                     // 9
            Instr::GoToRoot,                                                     // 10
            Instr::Jump(3),                                                      // 11
        ];
        debug_assert_eq!(v.len(), fin);
        v.push(Instr::Transit(Label::Finish(k + 1)));                            // fin
        v.push(Instr::GoToRoot);
        v.push(Instr::AwaitAny(vec![Arm::new(end_phase_bc.clone(), fin + 3)]));
        v.push(Instr::Transit(Label::Gather));
        for i in 1..=k {
            let base = v.len();
            v.push(Instr::Transit(Label::Visit(i)));
            v.push(Instr::RightUntilAny(vec![Arm::new(
                single(&holders[i as usize - 1], Label::Wait),
                base + 2,
            )]));
            v.push(Instr::Transit(Label::Finish(i)));
            v.push(Instr::GoToRoot);
        }
        let base = v.len();
        v.push(Instr::Transit(Label::FinishAll));
        v.push(Instr::RightUntilAny(vec![Arm::new(end_phase_d, base + 2)]));
        v.push(Instr::Transit(Label::EndComputation));
        v.push(Instr::Stop);
        agents.push(Arc::new(AgentProgram::new(conductor.clone(), v)?));
        provenance.insert(conductor.clone(), Provenance::Conductor);
    }

    // Groups: holders with their composites for 1..k; the last argument's
    // group carries its holder, the counter and the conductor.
    let mut groups: Vec<Vec<AgentId>> = Vec::with_capacity(k as usize + 1);
    for i in 1..=k {
        let mut group = vec![holders[i as usize - 1].clone()];
        group.extend(
            pairs
                .iter()
                .filter(|p| p.a_group == i)
                .map(|p| p.id.clone()),
        );
        groups.push(group);
    }
    groups.push(vec![
        holders[k as usize].clone(),
        counter.clone(),
        conductor.clone(),
    ]);

    // Synchronizers: one composite per argument group (all composites are
    // at the root when the conductor starts the run) and the conductor.
    let mut synchronizers: Vec<AgentId> = Vec::with_capacity(k as usize + 1);
    for i in 1..=k {
        let d = pairs
            .iter()
            .find(|p| p.a_group == i)
            .expect("base team covers every group");
        synchronizers.push(d.id.clone());
    }
    synchronizers.push(conductor);

    Ok(SubTeam {
        agents,
        groups,
        synchronizers,
        arity: k + 1,
        provenance,
    })
}
