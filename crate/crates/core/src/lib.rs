//! First-order optimality certificates (Fritz John / KKT) for maximization
//! problems with finite, semi-infinite, composed and equality constraints.
//!
//! The pipeline: [`model`] evaluates a constraint family at a candidate point,
//! [`multipliers`] builds the near-active gradient hull `T_C(x̂)` along a
//! shrinking ε-ladder and decides `0 ∈ [∇f(x̂), T_C(x̂)]` by linear
//! programming, and [`reduction`] handles `g(x) ∈ A` and `h(x) = 0` on top of
//! that.

pub mod checks;
pub mod exprlang;
pub mod fixtures;
pub mod geometry;
pub mod linalg;
pub mod model;
pub mod multipliers;
pub mod par;
pub mod reduction;
pub mod tag;

pub use exprlang::{EvalError, ExprFn, ParseError};
pub use par::Execution;
pub use tag::Tag;
