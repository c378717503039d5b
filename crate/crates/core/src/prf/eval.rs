//! Direct evaluator for [`PrfExpr`]: the ground-truth oracle.
//!
//! Values are arbitrary precision; primitive recursive functions grow fast
//! and a silently wrapping oracle would corrupt every downstream check. A
//! step budget guards against fast-growing functions at desk scale.

use super::PrfExpr;
use num_bigint::BigUint;
use thiserror::Error;

/// Natural number, unbounded.
pub type Nat = BigUint;

/// Evaluation limits.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Maximum number of primitive reductions before giving up.
    pub budget: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions { budget: 10_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("oracle budget exhausted after {budget} reductions")]
    BudgetExhausted { budget: u64 },
    #[error("arity mismatch: expression takes {expected} arguments, {found} given")]
    ArityMismatch { expected: u32, found: usize },
}

/// Evaluates `expr` on `args` with the default budget.
pub fn eval_oracle(expr: &PrfExpr, args: &[Nat]) -> Result<Nat, EvalError> {
    eval_oracle_with(expr, args, &EvalOptions::default())
}

/// Evaluates `expr` on `args` under the given limits.
pub fn eval_oracle_with(
    expr: &PrfExpr,
    args: &[Nat],
    options: &EvalOptions,
) -> Result<Nat, EvalError> {
    if expr.arity() as usize != args.len() {
        return Err(EvalError::ArityMismatch {
            expected: expr.arity(),
            found: args.len(),
        });
    }
    let mut steps = 0u64;
    eval(expr, args, options.budget, &mut steps)
}

fn eval(expr: &PrfExpr, args: &[Nat], budget: u64, steps: &mut u64) -> Result<Nat, EvalError> {
    *steps += 1;
    if *steps > budget {
        return Err(EvalError::BudgetExhausted { budget });
    }
    match expr {
        PrfExpr::Zero => Ok(Nat::ZERO),
        PrfExpr::Succ => Ok(&args[0] + 1u32),
        PrfExpr::Proj { i, .. } => Ok(args[*i as usize - 1].clone()),
        PrfExpr::Compose { g, hs } => {
            let mut inner = Vec::with_capacity(hs.len());
            for h in hs {
                inner.push(eval(h, args, budget, steps)?);
            }
            eval(g, &inner, budget, steps)
        }
        PrfExpr::PrimRec { h, g } => {
            let (xs, y) = args.split_at(args.len() - 1);
            // Iterating y times costs at least y reductions, so a last
            // argument beyond the budget exhausts it by definition.
            let y = u64::try_from(&y[0]).map_err(|_| EvalError::BudgetExhausted { budget })?;
            let mut acc = eval(h, xs, budget, steps)?;
            let mut g_args: Vec<Nat> = xs.to_vec();
            g_args.push(Nat::ZERO);
            g_args.push(Nat::ZERO);
            for t in 0..y {
                g_args[xs.len()] = Nat::from(t);
                g_args[xs.len() + 1] = acc;
                acc = eval(g, &g_args, budget, steps)?;
            }
            Ok(acc)
        }
    }
}
