//! Small problems with known answers, used by the tests, the benchmarks and
//! the `selftest` command.

use crate::exprlang::ExprFn;
use crate::geometry::Polyhedron;
use crate::model::{ConstraintFamily, FamilyMember, IndexSet, Problem};

/// Parses a function of `x` only; panics on malformed source.
pub fn expr(src: &str, p: usize) -> ExprFn {
    ExprFn::parse(src, p, 0).expect("fixture expression")
}

/// max −x1² − x2 s.t. x1 ≥ 0 and x2 + 1/k ≥ 0 for all k ≥ 1.
pub fn exn1() -> Problem {
    let fam = ConstraintFamily::Finite(vec![
        FamilyMember::Single(expr("x1", 2)),
        FamilyMember::Sequence(ExprFn::parse("x2 + t1", 2, 1).expect("valid fixture")),
    ]);
    Problem::new(2, expr("-x1^2 - x2", 2), Some(fam), None, None).expect("valid fixture")
}

pub fn finite(objective: &str, constraints: &[&str], p: usize) -> Problem {
    let fam = ConstraintFamily::Finite(
        constraints
            .iter()
            .map(|c| FamilyMember::Single(expr(c, p)))
            .collect(),
    );
    Problem::new(p, expr(objective, p), Some(fam), None, None).expect("valid fixture")
}

/// max x1 + x2 s.t. 1 − t·x1 − (1−t)·x2 ≥ 0 for t ∈ [0, 1].
pub fn linear_sip(grid: usize) -> Problem {
    let fam = ConstraintFamily::Parametric {
        h: ExprFn::parse("1 - t1*x1 - (1-t1)*x2", 2, 1).expect("valid fixture"),
        index: IndexSet::Box {
            lower: vec![0.0],
            upper: vec![1.0],
            grid,
        },
    };
    Problem::new(2, expr("x1 + x2", 2), Some(fam), None, None).expect("valid fixture")
}

/// max 0.6·x1 + 0.8·x2 s.t. 1 − x1·cos t − x2·sin t ≥ 0 for t ∈ [0, 1.5];
/// the only active index at (0.6, 0.8) is t = atan2(0.8, 0.6).
pub fn trig_sip(grid: usize) -> Problem {
    let fam = ConstraintFamily::Parametric {
        h: ExprFn::parse("1 - x1*cos(t1) - x2*sin(t1)", 2, 1).expect("valid fixture"),
        index: IndexSet::Box {
            lower: vec![0.0],
            upper: vec![1.5],
            grid,
        },
    };
    Problem::new(2, expr("0.6*x1 + 0.8*x2", 2), Some(fam), None, None).expect("valid fixture")
}

pub const TRIG_CANDIDATE: [f64; 2] = [0.6, 0.8];

/// max x1 s.t. x1² + x2² − 1 = 0.
pub fn circle() -> Problem {
    Problem::new(2, expr("x1", 2), None, None, Some(vec![expr("x1^2 + x2^2 - 1", 2)])).expect("valid fixture")
}

/// max x2 s.t. x1 = 0 written twice.
pub fn duplicated_rows() -> Problem {
    Problem::new(2, expr("x2", 2), None, None, Some(vec![expr("x1", 2), expr("x1", 2)])).expect("valid fixture")
}

pub fn orthant(p: usize) -> Polyhedron {
    let normals = (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    Polyhedron::cone(p, normals).expect("valid fixture")
}

/// max −x2 s.t. (x1, x2 − x1²) in the nonnegative orthant.
pub fn composed_orthant() -> Problem {
    Problem::new(
        2,
        expr("-x2", 2),
        Some(ConstraintFamily::Polyhedral(orthant(2))),
        Some(vec![expr("x1", 2), expr("x2 - x1^2", 2)]),
        None,
    )
    .expect("valid fixture")
}

/// max −x1 − x2 s.t. x ≥ 0 (identity inner map) and x1 − x2 = 0.
pub fn kernel_orthant() -> Problem {
    Problem::new(
        2,
        expr("-x1 - x2", 2),
        Some(ConstraintFamily::Polyhedral(orthant(2))),
        Some(vec![expr("x1", 2), expr("x2", 2)]),
        Some(vec![expr("x1 - x2", 2)]),
    )
    .expect("valid fixture")
}

/// min x1 + x2 over {x1 + x2 ≥ 1, x1 ≥ 0}, written as max −x1 − x2.
pub fn halfplane() -> Problem {
    let a = Polyhedron::new(2, vec![vec![1.0, 1.0], vec![1.0, 0.0]], vec![1.0, 0.0]).expect("valid fixture");
    Problem::new(2, expr("-x1 - x2", 2), Some(ConstraintFamily::Polyhedral(a)), None, None).expect("valid fixture")
}

/// The hyperplane `{y : y1 = 0}` in ℝ² as a cone with empty interior.
pub fn hyperplane_cone() -> Polyhedron {
    Polyhedron::cone(2, vec![vec![1.0, 0.0], vec![-1.0, 0.0]]).expect("valid fixture")
}

/// max −x1 − x2 s.t. y1 ≥ 0 where y = (x1 + x2, x1 − x2).
pub fn rotated_composition() -> Problem {
    let fam = ConstraintFamily::Finite(vec![FamilyMember::Single(expr("x1", 2))]);
    Problem::new(
        2,
        expr("-x1 - x2", 2),
        Some(fam),
        Some(vec![expr("x1 + x2", 2), expr("x1 - x2", 2)]),
        None,
    )
    .expect("valid fixture")
}
