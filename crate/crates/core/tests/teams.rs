//! Compiled teams against the direct evaluator, plus the structural
//! properties of the constructions themselves.

use num_bigint::BigUint;
use prfteam_core::halfline::{run, verify_trace, RunOptions, RunStatus};
use prfteam_core::machine::{slices_disjoint, Label, Team};
use prfteam_core::prf::{eval_oracle, parse_prf, PrfExpr};
use prfteam_core::synthesis::{
    compile, compile_proj, compile_succ, compile_zero, Provenance, RecClass,
};

fn team_value(team: &Team, args: &[u64], max_rounds: u64) -> u64 {
    let result = run(team, args, &RunOptions::new(max_rounds)).unwrap();
    assert_eq!(
        result.status,
        RunStatus::Completed,
        "run did not complete on {args:?}"
    );
    assert!(
        result.sync_round.is_some(),
        "no synchronization round on {args:?}"
    );
    result.value.unwrap()
}

fn assert_matches_oracle(expr: &PrfExpr, args: &[u64], max_rounds: u64) {
    let plan = compile(expr).unwrap();
    let got = team_value(&plan.team, args, max_rounds);
    let expected = eval_oracle(expr, &args.iter().map(|&v| BigUint::from(v)).collect::<Vec<_>>())
        .unwrap();
    assert_eq!(BigUint::from(got), expected, "wrong value on {args:?}");
}

fn grid(dims: &[std::ops::RangeInclusive<u64>]) -> Vec<Vec<u64>> {
    let mut points = vec![vec![]];
    for dim in dims {
        let mut next = Vec::new();
        for p in &points {
            for v in dim.clone() {
                let mut q = p.clone();
                q.push(v);
                next.push(q);
            }
        }
        points = next;
    }
    points
}

#[test]
fn zero_team_walks_home() {
    let (team, _) = compile_zero("f").into_team().unwrap();
    let result = run(&team, &[0], &RunOptions::default()).unwrap();
    assert_eq!(result.status, RunStatus::Completed);
    assert_eq!(result.value, Some(0));
    assert_eq!(result.rounds, 1); // already at the root: stop consumes round 0

    assert_eq!(team_value(&team, &[7], 1_000_000), 0);
}

#[test]
fn zero_team_state_count_is_input_independent() {
    let (team, _) = compile_zero("f").into_team().unwrap();
    let compile_time: Vec<usize> = team
        .agents()
        .iter()
        .map(|a| a.enumerate_states(1_000_000).unwrap().len())
        .collect();
    for x in 0..=20 {
        let mut opts = RunOptions::default();
        opts.collect_observed = true;
        let result = run(&team, &[x], &opts).unwrap();
        let observed = result.observed_states.unwrap();
        for (n, agent) in team.agents().iter().enumerate() {
            let slice = agent.enumerate_states(1_000_000).unwrap();
            for state in &observed[n] {
                assert!(
                    state.is_stop() || slice.contains(state),
                    "observed state outside compile-time set: {state}"
                );
            }
            assert_eq!(slice.len(), compile_time[n]);
        }
    }
}

#[test]
fn succ_team_computes_successor() {
    let (team, _) = compile_succ("f").into_team().unwrap();
    assert_eq!(team.len(), 2);
    assert_eq!(team.groups().len(), 1);
    assert_eq!(team_value(&team, &[0], 1_000_000), 1);
    assert_eq!(team_value(&team, &[6], 1_000_000), 7);
}

#[test]
fn succ_team_diverges_in_round_one() {
    // From x = 3 the lead heads for the root while the marker pushes right.
    let (team, _) = compile_succ("f").into_team().unwrap();
    let config = prfteam_core::halfline::init_configuration(&team, &[3]).unwrap();
    let next = prfteam_core::halfline::step(&team, &config).unwrap();
    assert_eq!(next.positions, vec![2, 4]);
}

#[test]
fn succ_team_synchronizes_for_small_arguments() {
    let (team, _) = compile_succ("f").into_team().unwrap();
    for x in [0u64, 1, 5] {
        let result = run(&team, &[x], &RunOptions::default()).unwrap();
        assert_eq!(result.status, RunStatus::Completed);
        let sync = result.sync_round.expect("synchronization round");
        // The lead visits the root exactly in round x (round 0 when x = 0).
        assert_eq!(sync, x);
    }
}

#[test]
fn succ_team_slices_are_disjoint() {
    let (team, _) = compile_succ("f").into_team().unwrap();
    assert_eq!(slices_disjoint(&team), Ok(true));
}

#[test]
fn proj_team_selects_its_argument() {
    let (team, _) = compile_proj("f", 3, 2).unwrap().into_team().unwrap();
    assert_eq!(team_value(&team, &[4, 7, 2], 1_000_000), 7);

    let (team, _) = compile_proj("f", 2, 1).unwrap().into_team().unwrap();
    assert_eq!(team_value(&team, &[0, 0], 1_000_000), 0);

    let (team, _) = compile_proj("f", 4, 4).unwrap().into_team().unwrap();
    assert_eq!(team_value(&team, &[1, 2, 3, 9], 1_000_000), 9);
}

#[test]
fn proj_team_placement() {
    // Walkers at their own arguments, the marker with group 2.
    let (team, _) = compile_proj("f", 3, 2).unwrap().into_team().unwrap();
    let config = prfteam_core::halfline::init_configuration(&team, &[4, 7, 2]).unwrap();
    assert_eq!(config.positions, vec![4, 7, 2, 7]);
}

#[test]
fn identity_projection_works() {
    // proj(1,1) is admitted as the identity and must still synchronize.
    let (team, _) = compile_proj("f", 1, 1).unwrap().into_team().unwrap();
    for x in 0..=8 {
        let result = run(&team, &[x], &RunOptions::default()).unwrap();
        assert_eq!(result.status, RunStatus::Completed);
        assert_eq!(result.value, Some(x));
        assert!(result.sync_round.is_some());
    }
}

#[test]
fn basic_teams_match_oracle_on_grids() {
    for x in 0..=8u64 {
        assert_matches_oracle(&PrfExpr::Zero, &[x], 1_000_000);
        assert_matches_oracle(&PrfExpr::Succ, &[x], 1_000_000);
    }
    for k in 1..=3u32 {
        for i in 1..=k {
            let expr = PrfExpr::proj(k, i).unwrap();
            for args in grid(&vec![0..=4; k as usize]) {
                assert_matches_oracle(&expr, &args, 1_000_000);
            }
        }
    }
}

#[test]
fn composition_of_succ_and_proj() {
    // g(a, b, c) = succ(c): the step function of addition.
    let expr = parse_prf("compose(succ, [proj(3,3)])").unwrap();
    assert_matches_oracle(&expr, &[5, 2, 9], 1_000_000);
    for args in grid(&vec![0..=3; 3]) {
        assert_matches_oracle(&expr, &args, 1_000_000);
    }
}

#[test]
fn composition_of_zero_and_proj() {
    let expr = parse_prf("compose(zero, [proj(3,1)])").unwrap();
    assert_matches_oracle(&expr, &[4, 9, 1], 1_000_000);
}

#[test]
fn composition_of_succ_with_succ() {
    let expr = parse_prf("compose(succ, [succ])").unwrap();
    for x in 0..=5 {
        assert_matches_oracle(&expr, &[x], 1_000_000);
    }
}

#[test]
fn composition_agent_count_is_product() {
    // One inner team: every (a, b) pair exists.
    let expr = parse_prf("compose(succ, [succ])").unwrap();
    let plan = compile(&expr).unwrap();
    assert_eq!(plan.agent_count(), 4);

    let expr = parse_prf("compose(zero, [proj(3,1)])").unwrap();
    let plan = compile(&expr).unwrap();
    assert_eq!(plan.agent_count(), 4); // 4 projection agents x 1 zero agent
}

#[test]
fn two_inner_functions_compose() {
    // f(x) = x selected twice then projected: exercises l = 2 with group-
    // matched pairing.
    let expr = parse_prf("compose(proj(2,2), [succ, zero])").unwrap();
    for x in 0..=4 {
        assert_matches_oracle(&expr, &[x], 1_000_000);
    }
}

#[test]
fn add_matches_oracle_and_counts_phases() {
    let add = parse_prf("add = primrec(proj(1,1), compose(succ, [proj(3,3)]))").unwrap();
    let plan = compile(&add).unwrap();
    // 2 base agents x 8 step agents + 2 holders + counter + conductor.
    assert_eq!(plan.agent_count(), 20);

    let conductor = plan
        .provenance
        .iter()
        .find(|(_, p)| matches!(p, Provenance::Conductor))
        .map(|(id, _)| id.clone())
        .unwrap();

    for x in 0..=4u64 {
        for y in 0..=4u64 {
            let mut opts = RunOptions::new(10_000_000);
            opts.watch_label_entries = vec![(conductor.clone(), Label::Coord)];
            let result = run(&plan.team, &[x, y], &opts).unwrap();
            assert_eq!(result.status, RunStatus::Completed, "add({x},{y})");
            assert_eq!(result.value, Some(x + y), "add({x},{y})");
            assert!(result.sync_round.is_some());
            // One coordination per step phase: exactly the last argument.
            assert_eq!(result.label_entry_counts[0], y, "phases of add({x},{y})");
        }
    }
}

#[test]
fn add_with_zero_last_argument() {
    let add = parse_prf("primrec(proj(1,1), compose(succ, [proj(3,3)]))").unwrap();
    let plan = compile(&add).unwrap();
    for x in 0..=6 {
        assert_eq!(team_value(&plan.team, &[x, 0], 10_000_000), x);
    }
}

#[test]
fn recursion_classes_follow_step_groups() {
    let add = parse_prf("primrec(proj(1,1), compose(succ, [proj(3,3)]))").unwrap();
    let plan = compile(&add).unwrap();
    let mut counts = std::collections::BTreeMap::new();
    for p in plan.provenance.values() {
        if let Provenance::RecursionPair { class, .. } = p {
            *counts.entry(*class).or_insert(0) += 1;
        }
    }
    // Step team: group 1 has 2 agents, group 2 has 2, group 3 has 4;
    // 2 base agents multiply each.
    assert_eq!(counts[&RecClass::B], 4);
    assert_eq!(counts[&RecClass::C], 4);
    assert_eq!(counts[&RecClass::D], 8);
}

#[test]
fn pred_matches_oracle() {
    let text = "\
        pred2 = primrec(zero, proj(3,2))\n\
        pred = compose(pred2, [proj(1,1), proj(1,1)])\n\
        pred";
    let pred = parse_prf(text).unwrap();
    let plan = compile(&pred).unwrap();
    for y in 0..=10u64 {
        let got = team_value(&plan.team, &[y], 100_000_000);
        assert_eq!(got, y.saturating_sub(1), "pred({y})");
    }
}

#[test]
fn mult_step_function_matches_oracle() {
    // g(a, b, c) = add(a, c): the step function of multiplication, an
    // outer team that is itself a recursion.
    let text = "\
        add = primrec(proj(1,1), compose(succ, [proj(3,3)]))\n\
        compose(add, [proj(3,1), proj(3,3)])";
    let expr = parse_prf(text).unwrap();
    let plan = compile(&expr).unwrap();
    for args in [[1u64, 0, 2], [0, 0, 0], [2, 1, 3], [3, 2, 0]] {
        let got = team_value(&plan.team, &args, 100_000_000);
        assert_eq!(got, args[0] + args[2], "step({args:?})");
    }
}

#[test]
fn mult_matches_oracle() {
    let text = "\
        add = primrec(proj(1,1), compose(succ, [proj(3,3)]))\n\
        mult = primrec(compose(zero, [proj(1,1)]), compose(add, [proj(3,1), proj(3,3)]))\n\
        mult";
    let mult = parse_prf(text).unwrap();
    let plan = compile(&mult).unwrap();
    assert_eq!(slices_disjoint(&plan.team), Ok(true));
    for (x, y) in [(0u64, 0u64), (1, 1), (3, 2), (2, 3), (4, 0), (0, 4)] {
        let got = team_value(&plan.team, &[x, y], 100_000_000);
        assert_eq!(got, x * y, "mult({x},{y})");
    }
}

#[test]
fn compiled_traces_respect_safety_rules() {
    let add = parse_prf("primrec(proj(1,1), compose(succ, [proj(3,3)]))").unwrap();
    let plan = compile(&add).unwrap();
    let result = run(&plan.team, &[2, 3], &RunOptions::new(1_000_000).with_trace()).unwrap();
    assert_eq!(result.status, RunStatus::Completed);
    verify_trace(result.trace.as_ref().unwrap()).unwrap();
}

#[test]
fn counter_position_marks_phases() {
    let add = parse_prf("primrec(proj(1,1), compose(succ, [proj(3,3)]))").unwrap();
    let plan = compile(&add).unwrap();
    let counter_idx = plan
        .provenance
        .iter()
        .find(|(_, p)| matches!(p, Provenance::Counter))
        .and_then(|(id, _)| plan.team.agent_index(id))
        .unwrap();
    let result = run(&plan.team, &[2, 3], &RunOptions::new(1_000_000).with_trace()).unwrap();
    let trace = result.trace.unwrap();
    // From its walk to the root until it reaches the last argument's node,
    // the counter's position grows one node at a time: 0, 1, ..., y. It
    // only moves again for the final gather.
    let positions: Vec<u64> = trace.iter().map(|c| c.positions[counter_idx]).collect();
    let first_root = positions.iter().position(|&p| p == 0).unwrap();
    let mut last = 0;
    for &p in &positions[first_root..] {
        assert!(p == last || p == last + 1, "counter jumped: {last} -> {p}");
        last = p.max(last);
        if last == 3 {
            break;
        }
    }
    assert_eq!(last, 3, "counter never marked the last phase");
}

#[test]
fn add_round_count_is_pinned() {
    // Regression golden: the exact evolution of add(2,3), including its
    // length, is deterministic. A change here means the constructions or
    // the round semantics moved.
    let add = parse_prf("primrec(proj(1,1), compose(succ, [proj(3,3)]))").unwrap();
    let plan = compile(&add).unwrap();
    let result = run(&plan.team, &[2, 3], &RunOptions::new(10_000_000)).unwrap();
    assert_eq!(result.status, RunStatus::Completed);
    assert_eq!(result.value, Some(5));
    assert_eq!(result.rounds, 119);
}

#[test]
fn proj_builder_rejects_bad_indices() {
    assert!(compile_proj("f", 2, 3).is_err());
    assert!(compile_proj("f", 3, 0).is_err());
}

#[test]
fn compiled_zero_has_one_group() {
    let plan = compile(&PrfExpr::Zero).unwrap();
    assert_eq!(plan.team.groups().len(), 1);
    assert_eq!(plan.agent_count(), 1);
}

#[test]
fn compile_rejects_malformed_expressions() {
    let bad = PrfExpr::Compose {
        g: Box::new(PrfExpr::Succ),
        hs: vec![PrfExpr::Zero, PrfExpr::Zero],
    };
    assert!(compile(&bad).is_err());
}
