//! Property tests: the parser round-trips the printer, the evaluator
//! satisfies the recursion equations, and random compiled teams agree
//! with the evaluator and respect the movement rules.

use num_bigint::BigUint;
use prfteam_core::halfline::{run, verify_trace, RunOptions, RunStatus};
use prfteam_core::prf::{eval_oracle, parse_prf, PrfExpr};
use prfteam_core::synthesis::compile;
use proptest::prelude::*;

/// Expressions of a fixed arity, composed to a bounded depth.
fn arb_expr(arity: u32, depth: u32) -> BoxedStrategy<PrfExpr> {
    let mut leaves: Vec<PrfExpr> = (1..=arity)
        .map(|i| PrfExpr::proj(arity, i).unwrap())
        .collect();
    if arity == 1 {
        leaves.push(PrfExpr::Zero);
        leaves.push(PrfExpr::Succ);
    }
    let leaf = proptest::sample::select(leaves);
    if depth == 0 {
        return leaf.boxed();
    }
    let compose = (1u32..=2).prop_flat_map(move |l| {
        (
            arb_expr(l, depth - 1),
            proptest::collection::vec(arb_expr(arity, depth - 1), l as usize),
        )
            .prop_map(|(g, hs)| PrfExpr::compose(g, hs).unwrap())
    });
    if arity >= 2 {
        let primrec = (arb_expr(arity - 1, depth - 1), arb_expr(arity + 1, depth - 1))
            .prop_map(|(h, g)| PrfExpr::primrec(h, g).unwrap());
        prop_oneof![3 => leaf, 2 => compose, 2 => primrec].boxed()
    } else {
        prop_oneof![2 => leaf, 2 => compose].boxed()
    }
}

proptest! {
    #[test]
    fn parse_inverts_print(expr in arb_expr(2, 2)) {
        let text = expr.to_string();
        let back = parse_prf(&text).unwrap();
        prop_assert_eq!(expr, back);
    }

    #[test]
    fn eval_satisfies_recursion_equations(
        h in arb_expr(1, 1),
        g in arb_expr(3, 1),
        x in 0u64..4,
        y in 0u64..4,
    ) {
        let f = PrfExpr::primrec(h.clone(), g.clone()).unwrap();
        let nat = BigUint::from;
        // f(x, 0) = h(x)
        prop_assert_eq!(
            eval_oracle(&f, &[nat(x), nat(0u64)]).unwrap(),
            eval_oracle(&h, &[nat(x)]).unwrap()
        );
        // f(x, y+1) = g(x, y, f(x, y))
        let fy = eval_oracle(&f, &[nat(x), nat(y)]).unwrap();
        prop_assert_eq!(
            eval_oracle(&f, &[nat(x), nat(y + 1)]).unwrap(),
            eval_oracle(&g, &[nat(x), nat(y), fy]).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, .. ProptestConfig::default() })]

    #[test]
    fn compiled_teams_agree_with_the_evaluator(
        expr in arb_expr(1, 2),
        x in 0u64..3,
    ) {
        let plan = compile(&expr).unwrap();
        // Keep the run at desk scale; deep nests explode in agent count.
        prop_assume!(plan.agent_count() <= 64);
        let mut opts = RunOptions::new(2_000_000);
        opts.record_trace = true;
        let result = run(&plan.team, &[x], &opts).unwrap();
        prop_assert_eq!(result.status.clone(), RunStatus::Completed, "{}({})", expr, x);
        prop_assert!(result.sync_round.is_some());
        let expected = eval_oracle(&expr, &[BigUint::from(x)]).unwrap();
        prop_assert_eq!(BigUint::from(result.value.unwrap()), expected);
        verify_trace(result.trace.as_ref().unwrap()).map_err(TestCaseError::fail)?;

        // Determinism: the same run replays to the same evolution.
        let replay = run(&plan.team, &[x], &opts).unwrap();
        prop_assert_eq!(result.trace_hash, replay.trace_hash);
    }
}
