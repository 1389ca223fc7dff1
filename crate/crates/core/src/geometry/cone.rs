use serde::{Deserialize, Serialize};

use super::simplex::{LinearProgram, LpStatus, Relation, SimplexSolution};
use super::{GeometryError, Hull, TOL_LP};
use crate::linalg::{dot, norm2, norm_inf, scale, sub};
use crate::tag::Tag;

/// `{y : aⱼᵀy ≥ bⱼ for all j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyhedron {
    dim: usize,
    normals: Vec<Vec<f64>>,
    offsets: Vec<f64>,
}

impl Polyhedron {
    pub fn new(dim: usize, normals: Vec<Vec<f64>>, offsets: Vec<f64>) -> Result<Self, GeometryError> {
        if normals.len() != offsets.len() {
            return Err(GeometryError::InvalidRepresentation(format!(
                "{} normals but {} offsets",
                normals.len(),
                offsets.len()
            )));
        }
        for (j, a) in normals.iter().enumerate() {
            if a.len() != dim {
                return Err(GeometryError::Dimension {
                    expected: dim,
                    got: a.len(),
                });
            }
            if !a.iter().all(|v| v.is_finite()) || !offsets[j].is_finite() {
                return Err(GeometryError::InvalidRepresentation(format!(
                    "row {j} has a non-finite entry"
                )));
            }
            if norm_inf(a) == 0.0 {
                return Err(GeometryError::ZeroNormal(j));
            }
        }
        Ok(Polyhedron {
            dim,
            normals,
            offsets,
        })
    }

    /// A cone `{y : aⱼᵀy ≥ 0}`.
    pub fn cone(dim: usize, normals: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let n = normals.len();
        Polyhedron::new(dim, normals, vec![0.0; n])
    }

    /// The whole space (no rows).
    pub fn full(dim: usize) -> Self {
        Polyhedron {
            dim,
            normals: Vec::new(),
            offsets: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub fn normals(&self) -> &[Vec<f64>] {
        &self.normals
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn is_cone(&self) -> bool {
        self.offsets.iter().all(|&b| b == 0.0)
    }

    /// `aⱼ / ‖aⱼ‖₂`.
    pub fn unit_normal(&self, j: usize) -> Vec<f64> {
        scale(&self.normals[j], 1.0 / norm2(&self.normals[j]))
    }

    /// Signed slack of row `j` in normalized units: `(aⱼᵀy − bⱼ)/‖aⱼ‖₂`.
    pub fn slack(&self, j: usize, y: &[f64]) -> f64 {
        (dot(&self.normals[j], y) - self.offsets[j]) / norm2(&self.normals[j])
    }

    pub fn contains(&self, y: &[f64], tol: f64) -> bool {
        y.len() == self.dim && (0..self.len()).all(|j| self.slack(j, y) >= -tol)
    }
}

/// `R_A = {v : aⱼᵀv ≥ 0}`: same normals, offsets dropped.
pub fn recession_cone(a: &Polyhedron) -> Polyhedron {
    Polyhedron {
        dim: a.dim,
        normals: a.normals.clone(),
        offsets: vec![0.0; a.len()],
    }
}

/// Generators of the barrier cone `bar(A)` (functionals bounded above on a
/// nonempty `A`): `cone{−aⱼ/‖aⱼ‖}`. An empty generator list means `bar(A) = {0}`,
/// which for H-polyhedra happens exactly when `A` is the whole space.
pub fn barrier_cone(a: &Polyhedron) -> Hull {
    let gens = (0..a.len()).map(|j| scale(&a.unit_normal(j), -1.0)).collect();
    let tags = (0..a.len()).map(Tag::Normal).collect();
    Hull::with_tags(a.dim, gens, tags).expect("dimensions already validated")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConeInterior {
    pub nonempty: bool,
    /// Maximizer `e` with `‖e‖∞ ≤ 1`.
    pub witness: Vec<f64>,
    /// Optimal `δ = min_j (aⱼ/‖aⱼ‖)ᵀe`.
    pub margin: f64,
}

/// Decides `int(A) ≠ ∅` for a cone by maximizing the worst normalized margin
/// over the unit sup-ball.
pub fn cone_interior_nonempty(a: &Polyhedron, tol: f64) -> Result<ConeInterior, GeometryError> {
    if let Some(j) = a.offsets.iter().position(|&b| b != 0.0) {
        return Err(GeometryError::NotACone(j));
    }
    let p = a.dim;
    if a.is_empty() {
        let mut witness = vec![0.0; p];
        if p > 0 {
            witness[0] = 1.0;
        }
        return Ok(ConeInterior {
            nonempty: true,
            witness,
            margin: f64::INFINITY,
        });
    }
    // variables: e_1..e_p in [-1, 1], δ (free, capped so the program is bounded)
    let mut lp = LinearProgram::new(p + 1);
    for i in 0..p {
        lp.set_bounds(i, -1.0, 1.0);
    }
    lp.set_bounds(p, f64::NEG_INFINITY, (p as f64).sqrt() + 1.0);
    lp.set_cost(p, -1.0);
    for j in 0..a.len() {
        let mut row = a.unit_normal(j);
        row.push(-1.0);
        lp.add_row(row, Relation::Ge, 0.0);
    }
    let sol = lp.solve(TOL_LP)?;
    if sol.status != LpStatus::Optimal {
        return Err(super::LpError::Numerical(f64::NAN).into());
    }
    let witness = sol.point[..p].to_vec();
    let margin = (0..a.len())
        .map(|j| dot(&a.unit_normal(j), &witness))
        .fold(f64::INFINITY, f64::min);
    Ok(ConeInterior {
        nonempty: margin > tol,
        witness,
        margin,
    })
}

/// `A* = {y : gᵢᵀy ≥ 0}` for `A = cone{gᵢ}`. Zero generators add nothing.
pub fn dual_cone(generators: &Hull) -> Polyhedron {
    let normals: Vec<Vec<f64>> = generators
        .generators()
        .iter()
        .filter(|g| norm_inf(g) > 0.0)
        .cloned()
        .collect();
    let n = normals.len();
    Polyhedron {
        dim: generators.dim(),
        normals,
        offsets: vec![0.0; n],
    }
}

/// `A° = {y : gᵢᵀy ≤ 0} = −A*`.
pub fn polar_cone(generators: &Hull) -> Polyhedron {
    let mut d = dual_cone(generators);
    d.normals.iter_mut().for_each(|a| a.iter_mut().for_each(|v| *v = -*v));
    d
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeMembership {
    pub member: bool,
    /// Nonnegative weights on the generators.
    pub coeffs: Vec<f64>,
    /// Sup-norm distance from the target to `Σ coeffs[i] gᵢ`.
    pub distance: f64,
}

/// Decides `y ∈ cone{gᵢ}` up to sup-norm distance `tol`.
pub fn cone_member(y: &[f64], generators: &Hull, tol: f64) -> Result<ConeMembership, GeometryError> {
    let p = generators.dim();
    if y.len() != p {
        return Err(GeometryError::Dimension {
            expected: p,
            got: y.len(),
        });
    }
    let n = generators.len();
    if n == 0 {
        let distance = norm_inf(y);
        return Ok(ConeMembership {
            member: distance <= tol,
            coeffs: Vec::new(),
            distance,
        });
    }
    let s = n;
    let mut lp = LinearProgram::new(n + 1);
    lp.set_cost(s, 1.0);
    for j in 0..p {
        let mut row: Vec<f64> = generators.generators().iter().map(|g| g[j]).collect();
        row.push(-1.0);
        lp.add_row(row.clone(), Relation::Le, y[j]);
        row[s] = 1.0;
        lp.add_row(row, Relation::Ge, y[j]);
    }
    let sol = lp.solve(TOL_LP.min(tol))?;
    if sol.status != LpStatus::Optimal {
        return Err(super::LpError::Numerical(f64::NAN).into());
    }
    let coeffs: Vec<f64> = sol.point[..n].iter().map(|c| c.max(0.0)).collect();
    let distance = norm_inf(&sub(&generators.combine(&coeffs), y));
    Ok(ConeMembership {
        member: distance <= tol,
        coeffs,
        distance,
    })
}

/// `min cᵀy over A`. An unbounded program carries the descent ray.
pub fn minimize_over(a: &Polyhedron, c: &[f64], tol_lp: f64) -> Result<SimplexSolution, GeometryError> {
    if c.len() != a.dim {
        return Err(GeometryError::Dimension {
            expected: a.dim,
            got: c.len(),
        });
    }
    let mut lp = LinearProgram::new(a.dim);
    for i in 0..a.dim {
        lp.free(i);
        lp.set_cost(i, c[i]);
    }
    for (n, &b) in a.normals.iter().zip(&a.offsets) {
        lp.add_row(n.clone(), Relation::Ge, b);
    }
    Ok(lp.solve(tol_lp)?)
}
