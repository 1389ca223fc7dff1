//! Convex geometry over generator lists: hull and segment-hull membership by
//! linear programming, Carathéodory reduction, and polyhedral cone calculus.

mod cone;
mod hull;
pub mod simplex;

use thiserror::Error;

pub use cone::{
    barrier_cone, cone_interior_nonempty, cone_member, dual_cone, minimize_over, polar_cone,
    recession_cone,
    ConeInterior, ConeMembership, Polyhedron,
};
pub use hull::{
    caratheodory_reduce, hull_distance, hull_gap, hull_member, segment_hull_member, segment_max_weight, Hull,
    Membership, SegmentMembership,
};
pub use simplex::{LinearProgram, LpError, LpStatus, Relation, SimplexSolution};

/// Default feasibility tolerance for the simplex solver.
pub const TOL_LP: f64 = 1e-9;
/// Default tolerance for hull and segment membership verdicts.
pub const TOL_MEMBER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("operation needs a nonempty generator list")]
    EmptyHull,
    #[error("polyhedron normal {0} is zero")]
    ZeroNormal(usize),
    #[error("polyhedron is not a cone (offset {0} is nonzero)")]
    NotACone(usize),
    #[error("invalid convex representation: {0}")]
    InvalidRepresentation(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}
