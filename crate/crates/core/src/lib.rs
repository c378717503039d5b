//! Teams of deterministic finite automata that compute primitive recursive
//! functions on the discrete half-line.
//!
//! The pipeline: parse an expression ([`prf`]), compile it into a team of
//! finite controllers ([`synthesis`]), run the team in synchronous rounds
//! on the half-line ([`halfline`]), and compare the node where the team
//! gathers and stops against the direct evaluator ([`prf::eval_oracle`]).

pub mod halfline;
pub mod machine;
pub mod prf;
pub mod synthesis;
