//! Problem representation and evaluation of constraint families at a
//! candidate point.
//!
//! All problems are maximizations: `max f(x)` subject to `φ(g(x)) ≥ 0` for
//! every member `φ` of the inequality family (with `g` the identity when no
//! inner map is given) and `h(x) = 0`.

mod diagnostics;
mod snapshot;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exprlang::{EvalError, ExprFn};
use crate::geometry::{GeometryError, Polyhedron};
use crate::par::Execution;

pub use diagnostics::{
    admissible_diagnostics, equi_lipschitz_estimate, feasibility, Admissibility,
    AdmissibleReport, Determination, Feasibility,
};
pub(crate) use diagnostics::require_feasible as require_feasible_snapshot;
pub(crate) use snapshot::inner_image;
pub use snapshot::{active_set, ActiveEntry, ActiveSet, Snapshot};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("invalid options: {0}")]
    Options(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("evaluating {context}: {source}")]
    Eval {
        context: String,
        #[source]
        source: EvalError,
    },
    #[error("candidate is infeasible: {tag} has value {value:e}")]
    Infeasible { tag: String, value: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl ModelError {
    pub(crate) fn eval(context: impl ToString, source: EvalError) -> Self {
        ModelError::Eval {
            context: context.to_string(),
            source,
        }
    }
}

/// Index set `T` of a parametric family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexSet {
    Finite(Vec<Vec<f64>>),
    /// Axis-aligned box sampled on a uniform grid with `grid` points per axis.
    Box {
        lower: Vec<f64>,
        upper: Vec<f64>,
        grid: usize,
    },
}

impl IndexSet {
    pub fn dim(&self) -> usize {
        match self {
            IndexSet::Finite(ts) => ts.first().map_or(0, Vec::len),
            IndexSet::Box { lower, .. } => lower.len(),
        }
    }

    fn validate(&self) -> Result<(), ModelError> {
        match self {
            IndexSet::Finite(ts) => {
                if ts.is_empty() {
                    return Err(ModelError::Invalid("finite index set is empty".into()));
                }
                let m = ts[0].len();
                if ts.iter().any(|t| t.len() != m) {
                    return Err(ModelError::Invalid("index points differ in dimension".into()));
                }
            }
            IndexSet::Box { lower, upper, grid } => {
                if lower.len() != upper.len() {
                    return Err(ModelError::Invalid("box bounds differ in dimension".into()));
                }
                if lower.is_empty() {
                    return Err(ModelError::Invalid("box has dimension 0".into()));
                }
                if lower.iter().zip(upper).any(|(l, u)| !l.is_finite() || !u.is_finite() || l > u) {
                    return Err(ModelError::Invalid("box needs finite lower <= upper".into()));
                }
                if *grid < 2 {
                    return Err(ModelError::Invalid("box grid needs at least 2 points per axis".into()));
                }
            }
        }
        Ok(())
    }

    /// Grid points in row-major order (last axis fastest).
    pub fn points(&self) -> Vec<Vec<f64>> {
        match self {
            IndexSet::Finite(ts) => ts.clone(),
            IndexSet::Box { lower, upper, grid } => {
                let m = lower.len();
                let total = grid.pow(m as u32);
                (0..total)
                    .map(|mut idx| {
                        let mut t = vec![0.0; m];
                        for axis in (0..m).rev() {
                            let i = idx % grid;
                            idx /= grid;
                            t[axis] = if i + 1 == *grid {
                                upper[axis]
                            } else {
                                lower[axis] + (upper[axis] - lower[axis]) * i as f64 / (grid - 1) as f64
                            };
                        }
                        t
                    })
                    .collect()
            }
        }
    }

    /// Grid spacing per axis (`None` for finite index sets).
    pub fn cell(&self) -> Option<Vec<f64>> {
        match self {
            IndexSet::Finite(_) => None,
            IndexSet::Box { lower, upper, grid } => Some(
                lower
                    .iter()
                    .zip(upper)
                    .map(|(l, u)| (u - l) / (grid - 1) as f64)
                    .collect(),
            ),
        }
    }
}

/// Member of a finite family.
#[derive(Debug, Clone, PartialEq)]
pub enum FamilyMember {
    /// A single constraint `φ(x) ≥ 0`.
    Single(ExprFn),
    /// The countable sequence `φ_k(x) = e(x, 1/k)`, `k ≥ 1`, written with
    /// `t1` standing for `1/k`. It is truncated at `k_max` and closed up by
    /// its limit `e(x, 0)`.
    Sequence(ExprFn),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConstraintFamily {
    Finite(Vec<FamilyMember>),
    Parametric { h: ExprFn, index: IndexSet },
    /// `{y : aⱼᵀy ≥ bⱼ}`; member `j` is the normalized slack
    /// `(aⱼᵀy − bⱼ)/‖aⱼ‖`.
    Polyhedral(Polyhedron),
}

impl ConstraintFamily {
    pub fn has_sequences(&self) -> bool {
        matches!(self, ConstraintFamily::Finite(ms) if ms.iter().any(|m| matches!(m, FamilyMember::Sequence(_))))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    dim: usize,
    objective: ExprFn,
    inequality: Option<ConstraintFamily>,
    inner_map: Option<Vec<ExprFn>>,
    equality: Option<Vec<ExprFn>>,
}

impl Problem {
    pub fn new(
        dim: usize,
        objective: ExprFn,
        inequality: Option<ConstraintFamily>,
        inner_map: Option<Vec<ExprFn>>,
        equality: Option<Vec<ExprFn>>,
    ) -> Result<Self, ModelError> {
        let prob = Problem {
            dim,
            objective,
            inequality,
            inner_map,
            equality,
        };
        prob.validate()?;
        Ok(prob)
    }

    fn validate(&self) -> Result<(), ModelError> {
        let p = self.dim;
        if p == 0 {
            return Err(ModelError::Invalid("dimension must be positive".into()));
        }
        let check = |what: &str, f: &ExprFn, ax: usize, at: usize| {
            if f.arity_x() != ax || f.arity_t() != at {
                Err(ModelError::Invalid(format!(
                    "{what} is declared over {} x and {} t variables, expected {ax} and {at}",
                    f.arity_x(),
                    f.arity_t()
                )))
            } else {
                Ok(())
            }
        };
        check("objective", &self.objective, p, 0)?;
        if let Some(g) = &self.inner_map {
            if g.is_empty() {
                return Err(ModelError::Invalid("inner map has no components".into()));
            }
            for (i, gi) in g.iter().enumerate() {
                check(&format!("inner map component {}", i + 1), gi, p, 0)?;
            }
            if self.inequality.is_none() {
                return Err(ModelError::Invalid("inner map given without constraints".into()));
            }
        }
        if let Some(h) = &self.equality {
            for (i, hi) in h.iter().enumerate() {
                check(&format!("equality {}", i + 1), hi, p, 0)?;
            }
        }
        let q = self.family_dim();
        match &self.inequality {
            None => {}
            Some(ConstraintFamily::Finite(ms)) => {
                if ms.is_empty() {
                    return Err(ModelError::Invalid("finite family is empty".into()));
                }
                for (i, m) in ms.iter().enumerate() {
                    match m {
                        FamilyMember::Single(f) => check(&format!("constraint {i}"), f, q, 0)?,
                        FamilyMember::Sequence(f) => check(&format!("constraint {i}"), f, q, 1)?,
                    }
                }
            }
            Some(ConstraintFamily::Parametric { h, index }) => {
                index.validate()?;
                check("parametric constraint", h, q, index.dim())?;
            }
            Some(ConstraintFamily::Polyhedral(a)) => {
                if a.dim() != q {
                    return Err(ModelError::Dimension {
                        expected: q,
                        got: a.dim(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Dimension of the space the inequality family acts on.
    pub fn family_dim(&self) -> usize {
        self.inner_map.as_ref().map_or(self.dim, Vec::len)
    }

    pub fn objective(&self) -> &ExprFn {
        &self.objective
    }

    pub fn inequality(&self) -> Option<&ConstraintFamily> {
        self.inequality.as_ref()
    }

    pub fn inner_map(&self) -> Option<&[ExprFn]> {
        self.inner_map.as_deref()
    }

    pub fn equality(&self) -> Option<&[ExprFn]> {
        self.equality.as_deref()
    }

    /// Same constraints, different objective.
    pub fn with_objective(&self, objective: ExprFn) -> Result<Problem, ModelError> {
        Problem::new(
            self.dim,
            objective,
            self.inequality.clone(),
            self.inner_map.clone(),
            self.equality.clone(),
        )
    }

    /// Same problem with the equality constraints dropped.
    pub fn without_equality(&self) -> Problem {
        Problem {
            equality: None,
            ..self.clone()
        }
    }

    pub fn objective_gradient(&self, x: &[f64], opts: &Options) -> Result<Vec<f64>, ModelError> {
        self.check_point(x)?;
        self.objective
            .value_and_grad_with(x, &[], opts.tol_kink)
            .map(|(_, g)| g)
            .map_err(|e| ModelError::eval("objective", e))
    }

    pub(crate) fn check_point(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.dim {
            return Err(ModelError::Dimension {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Numerical settings shared by every stage of the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// Membership tolerance for hull and segment-hull tests and certificate residuals.
    pub tol: f64,
    pub tol_lp: f64,
    /// Values in `[-tol_feas, 0)` count as zero.
    pub tol_feas: f64,
    pub tol_kink: f64,
    /// Hull-gap threshold for ladder stabilization.
    pub tol_hull: f64,
    /// Rank threshold relative to the Jacobian max-norm.
    pub tol_rank: f64,
    pub eps0: f64,
    pub shrink: f64,
    pub max_steps: usize,
    pub refine_depth: usize,
    /// Truncation of countable sequences.
    pub k_max: usize,
    /// Restrict the multiplier hull to strictly active, declared members.
    pub strict_active: bool,
    pub execution: Execution,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            tol: 1e-8,
            tol_lp: 1e-9,
            tol_feas: 1e-9,
            tol_kink: crate::exprlang::TOL_KINK,
            tol_hull: 1e-7,
            tol_rank: 1e-10,
            eps0: 1e-2,
            shrink: 0.5,
            max_steps: 20,
            refine_depth: 8,
            k_max: 10,
            strict_active: false,
            execution: Execution::Parallel,
        }
    }
}

impl Options {
    pub fn validate(&self) -> Result<(), ModelError> {
        let positive = [
            ("tol", self.tol),
            ("tol_lp", self.tol_lp),
            ("tol_feas", self.tol_feas),
            ("tol_kink", self.tol_kink),
            ("tol_hull", self.tol_hull),
            ("tol_rank", self.tol_rank),
            ("eps0", self.eps0),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::Options(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(ModelError::Options(format!(
                "shrink must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        if self.k_max == 0 {
            return Err(ModelError::Options("k_max must be at least 1".into()));
        }
        Ok(())
    }

    /// `eps0 · shrinkᵏ` for `k = 0..=max_steps`.
    pub fn ladder(&self) -> Vec<f64> {
        (0..=self.max_steps)
            .map(|k| self.eps0 * self.shrink.powi(k as i32))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_grid_points() {
        let t = IndexSet::Box {
            lower: vec![0.0, -1.0],
            upper: vec![1.0, 1.0],
            grid: 3,
        };
        let pts = t.points();
        assert_eq!(pts.len(), 9);
        assert_eq!(pts[0], vec![0.0, -1.0]);
        assert_eq!(pts[1], vec![0.0, 0.0]);
        assert_eq!(pts[8], vec![1.0, 1.0]);
        assert_eq!(t.cell().unwrap(), vec![0.5, 1.0]);
    }

    #[test]
    fn validation() {
        let f = ExprFn::parse("x1", 2, 0).unwrap();
        assert!(Problem::new(2, f.clone(), None, None, None).is_ok());
        assert!(Problem::new(3, f.clone(), None, None, None).is_err());
        let seq = ExprFn::parse("x2 + t1", 2, 1).unwrap();
        let fam = ConstraintFamily::Finite(vec![FamilyMember::Single(seq.clone())]);
        assert!(Problem::new(2, f.clone(), Some(fam), None, None).is_err());
        let fam = ConstraintFamily::Finite(vec![FamilyMember::Sequence(seq)]);
        assert!(Problem::new(2, f.clone(), Some(fam), None, None).is_ok());
        let bad_box = ConstraintFamily::Parametric {
            h: ExprFn::parse("t1", 2, 1).unwrap(),
            index: IndexSet::Box {
                lower: vec![1.0],
                upper: vec![0.0],
                grid: 5,
            },
        };
        assert!(Problem::new(2, f, Some(bad_box), None, None).is_err());
    }

    #[test]
    fn default_options_are_valid() {
        let o = Options::default();
        o.validate().unwrap();
        let l = o.ladder();
        assert_eq!(l.len(), 21);
        assert!(l.windows(2).all(|w| w[1] < w[0]));
        let bad = Options {
            shrink: 1.0,
            ..Options::default()
        };
        assert!(bad.validate().is_err());
    }
}
