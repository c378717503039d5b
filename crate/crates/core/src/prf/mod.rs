//! Primitive recursive function expressions: construction, validation,
//! parsing, pretty-printing, and direct evaluation.
//!
//! The evaluator in [`eval`] is the ground-truth oracle that every
//! compiled team is checked against.

mod eval;
mod parse;

pub use eval::{eval_oracle, eval_oracle_with, EvalError, EvalOptions, Nat};
pub use parse::{parse_program, parse_prf, ParseError, Program};

use std::fmt;
use thiserror::Error;

/// A primitive recursive function expression.
///
/// Arity is structural: `Zero` and `Succ` are unary, `Proj { k, .. }` is
/// `k`-ary, a composition inherits the common arity of its inner functions,
/// and `PrimRec { h, .. }` has arity `arity(h) + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PrfExpr {
    /// `Z(n) = 0`.
    Zero,
    /// `Succ(n) = n + 1`.
    Succ,
    /// `P^k_i(x_1, .., x_k) = x_i`, with `1 <= i <= k`. `proj(1, 1)` is the
    /// identity function.
    Proj { k: u32, i: u32 },
    /// `f(xs) = g(h_1(xs), .., h_l(xs))` where `l = arity(g)` and all `hs`
    /// share one arity.
    Compose { g: Box<PrfExpr>, hs: Vec<PrfExpr> },
    /// `f(xs, 0) = h(xs)`, `f(xs, y+1) = g(xs, y, f(xs, y))`.
    PrimRec { h: Box<PrfExpr>, g: Box<PrfExpr> },
}

/// Structural validity errors for [`PrfExpr`].
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("proj({k},{i}) is out of range: projections require 1 <= i <= k")]
    InvalidProj { k: u32, i: u32 },
    #[error("composition arity mismatch: outer function expects {expected} inner functions, found {found}")]
    ComposeArity { expected: u32, found: u32 },
    #[error("composition inner functions must share one arity: expected {first}, found {other} at position {position}")]
    MixedInnerArity { first: u32, other: u32, position: usize },
    #[error("composition needs at least one inner function")]
    EmptyCompose,
    #[error("primitive recursion arity mismatch: step function has arity {g_arity}, expected {expected} (base arity {h_arity} plus 2)")]
    PrimRecArity { h_arity: u32, g_arity: u32, expected: u32 },
}

impl PrfExpr {
    /// Builds a validated projection.
    pub fn proj(k: u32, i: u32) -> Result<Self, ExprError> {
        if i >= 1 && i <= k {
            Ok(PrfExpr::Proj { k, i })
        } else {
            Err(ExprError::InvalidProj { k, i })
        }
    }

    /// Builds a validated composition of `g` with `hs`.
    pub fn compose(g: PrfExpr, hs: Vec<PrfExpr>) -> Result<Self, ExprError> {
        if hs.is_empty() {
            return Err(ExprError::EmptyCompose);
        }
        let expected = g.arity();
        if expected as usize != hs.len() {
            return Err(ExprError::ComposeArity {
                expected,
                found: hs.len() as u32,
            });
        }
        let first = hs[0].arity();
        for (position, h) in hs.iter().enumerate() {
            let other = h.arity();
            if other != first {
                return Err(ExprError::MixedInnerArity {
                    first,
                    other,
                    position,
                });
            }
        }
        Ok(PrfExpr::Compose {
            g: Box::new(g),
            hs,
        })
    }

    /// Builds a validated primitive recursion of `h` (base) and `g` (step).
    pub fn primrec(h: PrfExpr, g: PrfExpr) -> Result<Self, ExprError> {
        let expected = h.arity() + 2;
        if g.arity() != expected {
            return Err(ExprError::PrimRecArity {
                h_arity: h.arity(),
                g_arity: g.arity(),
                expected,
            });
        }
        Ok(PrfExpr::PrimRec {
            h: Box::new(h),
            g: Box::new(g),
        })
    }

    /// The number of arguments this expression takes. Pure and total on
    /// well-formed expressions.
    pub fn arity(&self) -> u32 {
        match self {
            PrfExpr::Zero | PrfExpr::Succ => 1,
            PrfExpr::Proj { k, .. } => *k,
            PrfExpr::Compose { hs, .. } => hs[0].arity(),
            PrfExpr::PrimRec { h, .. } => h.arity() + 1,
        }
    }

    /// Re-checks every structural invariant of the tree.
    pub fn validate(&self) -> Result<(), ExprError> {
        match self {
            PrfExpr::Zero | PrfExpr::Succ => Ok(()),
            PrfExpr::Proj { k, i } => {
                PrfExpr::proj(*k, *i)?;
                Ok(())
            }
            PrfExpr::Compose { g, hs } => {
                g.validate()?;
                for h in hs {
                    h.validate()?;
                }
                PrfExpr::compose((**g).clone(), hs.clone())?;
                Ok(())
            }
            PrfExpr::PrimRec { h, g } => {
                h.validate()?;
                g.validate()?;
                PrfExpr::primrec((**h).clone(), (**g).clone())?;
                Ok(())
            }
        }
    }

    /// True if the tree contains a `PrimRec` node anywhere. Used to pick
    /// round budgets: recursion re-runs its step function once per phase.
    pub fn contains_primrec(&self) -> bool {
        match self {
            PrfExpr::Zero | PrfExpr::Succ | PrfExpr::Proj { .. } => false,
            PrfExpr::Compose { g, hs } => {
                g.contains_primrec() || hs.iter().any(|h| h.contains_primrec())
            }
            PrfExpr::PrimRec { .. } => true,
        }
    }
}

impl fmt::Display for PrfExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrfExpr::Zero => write!(f, "zero"),
            PrfExpr::Succ => write!(f, "succ"),
            PrfExpr::Proj { k, i } => write!(f, "proj({k}, {i})"),
            PrfExpr::Compose { g, hs } => {
                write!(f, "compose({g}, [")?;
                for (n, h) in hs.iter().enumerate() {
                    if n > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{h}")?;
                }
                write!(f, "])")
            }
            PrfExpr::PrimRec { h, g } => write!(f, "primrec({h}, {g})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn add_expr() -> PrfExpr {
        // add = primrec(proj(1,1), compose(succ, [proj(3,3)]))
        PrfExpr::primrec(
            PrfExpr::proj(1, 1).unwrap(),
            PrfExpr::compose(PrfExpr::Succ, vec![PrfExpr::proj(3, 3).unwrap()]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn arity_of_basics() {
        assert_eq!(PrfExpr::Zero.arity(), 1);
        assert_eq!(PrfExpr::Succ.arity(), 1);
        assert_eq!(PrfExpr::proj(4, 2).unwrap().arity(), 4);
    }

    #[test]
    fn arity_of_add_is_two() {
        assert_eq!(add_expr().arity(), 2);
    }

    #[test]
    fn arity_of_composed_zero_is_inner_arity() {
        let z3 = PrfExpr::compose(PrfExpr::Zero, vec![PrfExpr::proj(3, 1).unwrap()]).unwrap();
        assert_eq!(z3.arity(), 3);
    }

    #[test]
    fn proj_rejects_bad_index() {
        assert_eq!(
            PrfExpr::proj(2, 3),
            Err(ExprError::InvalidProj { k: 2, i: 3 })
        );
        assert_eq!(
            PrfExpr::proj(3, 0),
            Err(ExprError::InvalidProj { k: 3, i: 0 })
        );
        assert!(PrfExpr::proj(1, 1).is_ok());
    }

    #[test]
    fn compose_rejects_arity_mismatch() {
        // succ has arity 1 but two inner functions are given
        let err = PrfExpr::compose(
            PrfExpr::Succ,
            vec![PrfExpr::proj(2, 1).unwrap(), PrfExpr::proj(2, 2).unwrap()],
        )
        .unwrap_err();
        assert_eq!(
            err,
            ExprError::ComposeArity {
                expected: 1,
                found: 2
            }
        );
    }

    #[test]
    fn primrec_rejects_arity_mismatch() {
        let err = PrfExpr::primrec(PrfExpr::Succ, PrfExpr::Succ).unwrap_err();
        assert_eq!(
            err,
            ExprError::PrimRecArity {
                h_arity: 1,
                g_arity: 1,
                expected: 3
            }
        );
    }

    #[test]
    fn display_round_trips_through_parser() {
        let e = add_expr();
        let back = parse_prf(&e.to_string()).unwrap();
        assert_eq!(e, back);
    }
}
