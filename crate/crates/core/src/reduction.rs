//! Composed constraints `g(x) ∈ A` and equality constraints `h(x) = 0`,
//! reduced to the inequality certificate of [`crate::multipliers`].
//!
//! The equality reduction works in the kernel of `J_h(x̂)`: gradients are
//! restricted to an orthonormal kernel basis, certified there, and the
//! equality multiplier is recovered by least squares on the row space.

use serde::Serialize;

use crate::exprlang::{BinOp, Expr, ExprFn};
use crate::geometry::{
    caratheodory_reduce, cone_member, minimize_over, GeometryError, Hull, LinearProgram, LpStatus,
    Polyhedron, Relation,
};
use crate::linalg::{axpy, dot, echelon, norm2, norm_inf, orthonormalize, scale, solve_square, Matrix};
use crate::model::{
    feasibility, inner_image, ConstraintFamily, FamilyMember, ModelError, Options, Problem,
};
use crate::multipliers::{
    annotate, certificate_hull, certify_with_tc, decide, tc_approx, Certificate, CertificateKind,
    CertifyError, Weighted,
};
use crate::tag::Tag;

/// Numerical rank structure of a Jacobian at a point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Jacobian {
    /// One row per component.
    pub rows: Vec<Vec<f64>>,
    pub cols: usize,
    pub rank: usize,
    /// Absolute rank threshold used.
    pub tol_rank: f64,
    /// Accepted pivot magnitudes, in elimination order.
    pub pivots: Vec<f64>,
    pub pivot_cols: Vec<usize>,
    /// Orthonormal basis of the kernel, each with a positive leading entry.
    pub kernel_basis: Vec<Vec<f64>>,
    /// Unit vector `v` with `vᵀJ = 0`, present iff `rank < rows`.
    pub left_null: Option<Vec<f64>>,
}

impl Jacobian {
    /// `tol_rel` is scaled by the max-norm of the matrix.
    pub fn new(rows: Vec<Vec<f64>>, cols: usize, tol_rel: f64) -> Self {
        let m = Matrix::from_rows(&rows, cols);
        let tol_rank = tol_rel * m.max_abs();
        let e = echelon(&m, tol_rank);
        let kernel_basis = orthonormalize(&e.null_space(), 1e-12);
        let left_null = (e.rank() < rows.len()).then(|| {
            let et = echelon(&m.transpose(), tol_rank);
            let v = et.null_space().swap_remove(0);
            let mut u = scale(&v, 1.0 / norm2(&v));
            crate::linalg::canonical_sign(&mut u);
            u
        });
        Jacobian {
            rank: e.rank(),
            pivots: e.pivots.clone(),
            pivot_cols: e.pivot_cols.clone(),
            rows,
            cols,
            tol_rank,
            kernel_basis,
            left_null,
        }
    }

    /// Jacobian of the listed functions at `x`.
    pub fn at(fs: &[ExprFn], x: &[f64], opts: &Options) -> Result<Self, ModelError> {
        let mut rows = Vec::with_capacity(fs.len());
        for (i, f) in fs.iter().enumerate() {
            let (_, g) = f
                .value_and_grad_with(x, &[], opts.tol_kink)
                .map_err(|e| ModelError::eval(format!("equality {}", i + 1), e))?;
            rows.push(g);
        }
        Ok(Jacobian::new(rows, x.len(), opts.tol_rank))
    }

    pub fn is_onto(&self) -> bool {
        self.rank == self.rows.len()
    }

    /// `Jᵀv`.
    pub fn tr_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (r, &vi) in self.rows.iter().zip(v) {
            axpy(&mut out, vi, r);
        }
        out
    }

    /// Coordinates of `v` in the kernel basis.
    pub fn kernel_coords(&self, v: &[f64]) -> Vec<f64> {
        self.kernel_basis.iter().map(|k| dot(k, v)).collect()
    }

    /// Orthogonal projection onto the kernel.
    pub fn project_kernel(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for k in &self.kernel_basis {
            axpy(&mut out, dot(k, v), k);
        }
        out
    }

    /// Least-squares `w` for `Jᵀw = r` via the normal equations `JJᵀw = Jr`.
    /// `None` when `J` is not onto.
    pub fn solve_transpose(&self, r: &[f64]) -> Option<Vec<f64>> {
        let w = self.rows.len();
        if w == 0 {
            return Some(Vec::new());
        }
        let mut gram = Matrix::zeros(w, w);
        for i in 0..w {
            for j in 0..w {
                gram.set(i, j, dot(&self.rows[i], &self.rows[j]));
            }
        }
        let rhs: Vec<f64> = self.rows.iter().map(|row| dot(row, r)).collect();
        solve_square(&gram, &rhs, 1e-14 * gram.max_abs())
    }
}

fn konst(v: f64) -> Expr {
    if v < 0.0 {
        Expr::Neg(Box::new(Expr::Const(-v)))
    } else {
        Expr::Const(v)
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    Expr::Binary(BinOp::Add, Box::new(a), Box::new(b))
}

fn mul(a: f64, b: Expr) -> Expr {
    Expr::Binary(BinOp::Mul, Box::new(konst(a)), Box::new(b))
}

/// The literal composite problem: every member `φ` becomes `φ ∘ g`, so its
/// values are unchanged and its gradients are `J_g(x)ᵀ∇φ(g(x))`. Polyhedral
/// rows become finite members `(aⱼᵀg(x) − bⱼ)/‖aⱼ‖`.
pub fn compose_family(prob: &Problem) -> Result<Problem, ModelError> {
    let Some(g) = prob.inner_map() else {
        return Ok(prob.clone());
    };
    let p = prob.dim();
    let subs: Vec<Expr> = g.iter().map(|gi| gi.ast().clone()).collect();
    let lift = |f: &ExprFn| -> Result<ExprFn, ModelError> {
        ExprFn::from_ast(f.ast().substitute_x(&subs), p, f.arity_t())
            .map_err(|e| ModelError::Invalid(e.to_string()))
    };
    let family = match prob.inequality().expect("inner map implies a family") {
        ConstraintFamily::Finite(ms) => ConstraintFamily::Finite(
            ms.iter()
                .map(|m| {
                    Ok(match m {
                        FamilyMember::Single(f) => FamilyMember::Single(lift(f)?),
                        FamilyMember::Sequence(f) => FamilyMember::Sequence(lift(f)?),
                    })
                })
                .collect::<Result<_, ModelError>>()?,
        ),
        ConstraintFamily::Parametric { h, index } => ConstraintFamily::Parametric {
            h: lift(h)?,
            index: index.clone(),
        },
        ConstraintFamily::Polyhedral(a) => ConstraintFamily::Finite(
            (0..a.len())
                .map(|j| {
                    let u = a.unit_normal(j);
                    let b = a.offsets()[j] / norm2(&a.normals()[j]);
                    let mut e = konst(-b);
                    for (ui, gi) in u.iter().zip(&subs) {
                        if *ui != 0.0 {
                            e = add(e, mul(*ui, gi.clone()));
                        }
                    }
                    ExprFn::from_ast(e, p, 0)
                        .map(FamilyMember::Single)
                        .map_err(|e| ModelError::Invalid(e.to_string()))
                })
                .collect::<Result<_, ModelError>>()?,
        ),
    };
    Problem::new(
        p,
        prob.objective().clone(),
        Some(family),
        None,
        prob.equality().map(<[ExprFn]>::to_vec),
    )
}

/// Certificate for `g(x) ∈ A` with the functional `y*` on the family space.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComposedCertificate {
    pub certificate: Certificate,
    /// `y* = Σ αᵢ∇φᵢ(g(x̂))`, so that `x* = J_gᵀy*`.
    pub y_star: Option<Vec<f64>>,
    pub y_nonzero: bool,
    /// `‖J_gᵀy* − x*‖∞`.
    pub chain_residual: Option<f64>,
    pub image: Option<Vec<f64>>,
}

/// Pre-chain combination `Σ wᵢ ∇φᵢ(g(x̂))` of the certificate's generators.
fn outer_combination(coeffs: &[Weighted], outer: &Hull) -> Vec<f64> {
    let mut y = vec![0.0; outer.dim()];
    for c in coeffs {
        axpy(&mut y, c.weight, &outer.generators()[c.index]);
    }
    y
}

pub fn certify_composed(
    prob: &Problem,
    x: &[f64],
    opts: &Options,
) -> Result<ComposedCertificate, CertifyError> {
    let (cert, tc) = certify_with_tc(prob, x, opts)?;
    let (_, set) = certificate_hull(&tc, opts);
    let image = tc.feasibility.image.clone();
    let (y_star, chain_residual) = match (set.outer_hull(), cert.kind.is_certified()) {
        (Some(outer), true) if !cert.coeffs.is_empty() => {
            let y = outer_combination(&cert.coeffs, &outer);
            let (_, jac) = inner_image(prob, x, opts)?.expect("outer gradients imply an inner map");
            let chained = jac.tr_mul_vec(&y);
            let r = norm_inf(&crate::linalg::sub(&chained, &cert.witness));
            (Some(y), Some(r))
        }
        (None, true) if !cert.coeffs.is_empty() => (Some(cert.witness.clone()), Some(0.0)),
        _ => (None, None),
    };
    Ok(ComposedCertificate {
        y_nonzero: y_star.as_ref().is_some_and(|y| norm_inf(y) > opts.tol),
        certificate: cert,
        y_star,
        chain_residual,
        image,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `J_h` is rank deficient: a left-null vector certifies alone.
    NotOnto,
    /// `J_h` onto and no inequality family: classical Lagrange multipliers.
    OntoNoA,
    /// `J_h` onto with an inequality family: certify in `Ker J_h`, then lift.
    OntoWithA,
}

/// `λ₀∇f(x̂) + J_gᵀz₀* + J_hᵀw₀* = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullCertificate {
    pub branch: Branch,
    pub kind: CertificateKind,
    pub lambda0: f64,
    /// Multiplier on the family space (`ℝ^q`), when there is a family.
    pub z0: Option<Vec<f64>>,
    pub w0: Vec<f64>,
    pub residual: f64,
    pub objective_gradient: Vec<f64>,
    /// `J_g(x̂)` rows (identity when the family acts on `x` directly).
    pub inner_jacobian: Option<Vec<Vec<f64>>>,
    pub jacobian: Jacobian,
    /// `‖P_ker ∇f(x̂)‖∞` (branch `OntoNoA`).
    pub projected_gradient: Option<f64>,
    /// The certificate computed in kernel coordinates (branch `OntoWithA`).
    pub restricted: Option<Certificate>,
    /// Hull generators behind `z0`, with weights, in `ℝᵖ`.
    pub coeffs: Vec<Weighted>,
    pub assumptions: Vec<String>,
}

impl FullCertificate {
    /// `‖λ₀∇f + J_gᵀz₀ + J_hᵀw₀‖∞` from the stored data.
    pub fn recompute_residual(&self) -> f64 {
        let mut r = scale(&self.objective_gradient, self.lambda0);
        if let (Some(z), Some(jg)) = (&self.z0, &self.inner_jacobian) {
            for (row, &zi) in jg.iter().zip(z) {
                axpy(&mut r, zi, row);
            }
        }
        axpy(&mut r, 1.0, &self.jacobian.tr_mul(&self.w0));
        norm_inf(&r)
    }
}

fn identity_rows(p: usize) -> Vec<Vec<f64>> {
    (0..p)
        .map(|i| (0..p).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Certificate for the full problem with equality constraints.
pub fn certify_equality(
    prob: &Problem,
    x: &[f64],
    opts: &Options,
) -> Result<FullCertificate, CertifyError> {
    let feas = feasibility(prob, x, opts)?;
    if !feas.feasible {
        let (tag, value) = match feas.violated.first() {
            Some((t, v)) => (t.to_string(), *v),
            None => ("equality".to_string(), feas.equality_residual.unwrap_or(f64::NAN)),
        };
        return Err(ModelError::Infeasible { tag, value }.into());
    }
    let p = prob.dim();
    let grad = prob.objective_gradient(x, opts)?;
    let jac = Jacobian::at(prob.equality().unwrap_or(&[]), x, opts)?;
    let inner = match inner_image(prob, x, opts)? {
        Some((_, j)) => Some(j.row_vecs()),
        None => prob.inequality().map(|_| identity_rows(p)),
    };
    let q = prob.family_dim();
    let mut assumptions = vec![
        "J_h is only evaluated at the candidate; continuity and closed range nearby are assumed"
            .to_string(),
    ];
    if prob.inequality().is_some() {
        assumptions.push(
            "Lipschitz behaviour of the reduced problem near the candidate is assumed".into(),
        );
    }

    if let Some(v) = jac.left_null.clone() {
        let residual = norm_inf(&jac.tr_mul(&v));
        return Ok(FullCertificate {
            branch: Branch::NotOnto,
            kind: CertificateKind::EqualityDegenerate,
            lambda0: 0.0,
            z0: inner.as_ref().map(|_| vec![0.0; q]),
            w0: v,
            residual,
            objective_gradient: grad,
            inner_jacobian: inner,
            jacobian: jac,
            projected_gradient: None,
            restricted: None,
            coeffs: Vec::new(),
            assumptions,
        });
    }

    if prob.inequality().is_none() {
        let pg = norm_inf(&jac.project_kernel(&grad));
        let certified = pg <= opts.tol;
        let w0 = jac
            .solve_transpose(&scale(&grad, -1.0))
            .expect("onto Jacobian has an invertible Gram matrix");
        let mut cert = FullCertificate {
            branch: Branch::OntoNoA,
            kind: match (certified, prob.equality().is_some()) {
                (false, _) => CertificateKind::NoCertificate,
                (true, true) => CertificateKind::KKT,
                (true, false) => CertificateKind::Unconstrained,
            },
            lambda0: 1.0,
            z0: None,
            w0,
            residual: 0.0,
            objective_gradient: grad,
            inner_jacobian: None,
            jacobian: jac,
            projected_gradient: Some(pg),
            restricted: None,
            coeffs: Vec::new(),
            assumptions,
        };
        cert.residual = cert.recompute_residual();
        return Ok(cert);
    }

    // Restrict to the kernel and certify there.
    let tc = tc_approx(prob, x, opts)?;
    let (hull, set) = if tc.interior {
        (Hull::empty(p), tc.final_set.filter(|_| false))
    } else {
        certificate_hull(&tc, opts)
    };
    let d = jac.kernel_basis.len();
    let grad_k = jac.kernel_coords(&grad);
    let hull_k = hull.map(d, |g| jac.kernel_coords(g));
    let mut restricted = decide(&grad_k, &hull_k, opts)?;
    annotate(&mut restricted, &tc);

    let mut out = FullCertificate {
        branch: Branch::OntoWithA,
        kind: restricted.kind,
        lambda0: 0.0,
        z0: Some(vec![0.0; q]),
        w0: vec![0.0; jac.rows.len()],
        residual: restricted.residual,
        objective_gradient: grad.clone(),
        inner_jacobian: inner,
        jacobian: jac,
        projected_gradient: None,
        restricted: None,
        coeffs: Vec::new(),
        assumptions,
    };
    if !restricted.kind.is_certified() {
        out.restricted = Some(restricted);
        return Ok(out);
    }
    let (lambda, beta) = (restricted.lambda, restricted.beta);

    // Lift: among all α whose kernel image matches, pick one making the
    // full-space residual (which J_hᵀw must absorb) as small as possible.
    let mut coeffs: Vec<Weighted> = Vec::new();
    let mut x_star = vec![0.0; p];
    if beta > 0.0 {
        let alpha = lift_alpha(&grad, &hull, &out.jacobian, lambda, beta, opts)?
            .unwrap_or_else(|| {
                let mut a = vec![0.0; hull.len()];
                for c in &restricted.coeffs {
                    a[c.index] = c.weight;
                }
                a
            });
        let target = hull.combine(&alpha);
        let (idx, w) = caratheodory_reduce(&target, &hull, &alpha, opts.tol)?;
        coeffs = idx
            .iter()
            .zip(&w)
            .map(|(&i, &wi)| Weighted {
                index: i,
                tag: hull.tags()[i].clone(),
                weight: wi,
                generator: hull.generators()[i].clone(),
            })
            .collect();
        for c in &coeffs {
            axpy(&mut x_star, c.weight, &c.generator);
        }
    }
    let y_star = match set.outer_hull() {
        Some(outer) => outer_combination(&coeffs, &outer),
        None => x_star.clone(),
    };
    let mut r = scale(&grad, lambda);
    axpy(&mut r, beta, &x_star);
    out.w0 = out
        .jacobian
        .solve_transpose(&scale(&r, -1.0))
        .expect("onto Jacobian has an invertible Gram matrix");
    out.lambda0 = lambda;
    out.z0 = Some(scale(&y_star, beta));
    out.coeffs = coeffs;
    out.restricted = Some(restricted);
    out.residual = out.recompute_residual();
    if out.residual > opts.tol {
        out.kind = CertificateKind::NoCertificate;
    }
    Ok(out)
}

/// `argmin_α ‖λ∇f + βGα‖∞` over the simplex subject to
/// `Kᵀ(λ∇f + βGα) = 0`. `None` if the program fails numerically.
fn lift_alpha(
    grad: &[f64],
    hull: &Hull,
    jac: &Jacobian,
    lambda: f64,
    beta: f64,
    opts: &Options,
) -> Result<Option<Vec<f64>>, GeometryError> {
    let n = hull.len();
    let p = grad.len();
    let s = n;
    let mut lp = LinearProgram::new(n + 1);
    lp.set_cost(s, 1.0);
    let mut ones = vec![1.0; n + 1];
    ones[s] = 0.0;
    lp.add_row(ones, Relation::Eq, 1.0);
    for k in &jac.kernel_basis {
        let mut row: Vec<f64> = hull.generators().iter().map(|g| beta * dot(k, g)).collect();
        row.push(0.0);
        lp.add_row(row, Relation::Eq, -lambda * dot(k, grad));
    }
    for j in 0..p {
        let mut row: Vec<f64> = hull.generators().iter().map(|g| beta * g[j]).collect();
        row.push(-1.0);
        lp.add_row(row.clone(), Relation::Le, -lambda * grad[j]);
        row[s] = 1.0;
        lp.add_row(row, Relation::Ge, -lambda * grad[j]);
    }
    match lp.solve(opts.tol_lp) {
        Ok(sol) if sol.status == LpStatus::Optimal => {
            let a: Vec<f64> = sol.point[..n].iter().map(|v| v.max(0.0)).collect();
            let total: f64 = a.iter().sum();
            Ok(Some(a.iter().map(|v| v / total).collect()))
        }
        Ok(_) | Err(_) => Ok(None),
    }
}

/// Checks that `z` is a valid multiplier for `g(x̂) ∈ A`: `z ∈ (R_A)*` and
/// `zᵀg(x̂) = min_A zᵀy`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexSetReport {
    pub in_dual_recession: bool,
    /// Sup-norm distance from `z` to `(R_A)* = cone{aⱼ}`.
    pub dual_distance: f64,
    pub value: f64,
    /// `min_A zᵀy` (`None` when unbounded below or `A` is empty).
    pub minimum: Option<f64>,
    pub attains: bool,
    /// Direction of unbounded decrease, when there is one.
    pub ray: Option<Vec<f64>>,
    pub pass: bool,
}

pub fn convex_set_multiplier(
    a: &Polyhedron,
    image: &[f64],
    z: &[f64],
    tol: f64,
) -> Result<ConvexSetReport, GeometryError> {
    if image.len() != a.dim() || z.len() != a.dim() {
        return Err(GeometryError::Dimension {
            expected: a.dim(),
            got: if image.len() != a.dim() { image.len() } else { z.len() },
        });
    }
    let normals = Hull::with_tags(
        a.dim(),
        a.normals().to_vec(),
        (0..a.len()).map(Tag::Normal).collect(),
    )?;
    let cm = cone_member(z, &normals, tol)?;
    let value = dot(z, image);
    let sol = minimize_over(a, z, tol.min(1e-9))?;
    let (minimum, ray) = match sol.status {
        LpStatus::Optimal => (Some(sol.objective), None),
        LpStatus::Unbounded => (None, sol.ray),
        LpStatus::Infeasible => (None, None),
    };
    let attains = minimum.is_some_and(|m| (value - m).abs() <= tol * (1.0 + m.abs()));
    Ok(ConvexSetReport {
        in_dual_recession: cm.member,
        dual_distance: cm.distance,
        value,
        minimum,
        attains,
        ray,
        pass: cm.member && attains,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicated_rows_left_null() {
        let j = Jacobian::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]], 2, 1e-10);
        assert_eq!(j.rank, 1);
        assert!(!j.is_onto());
        let v = j.left_null.clone().unwrap();
        let s = 0.5f64.sqrt();
        assert!((v[0] - s).abs() < 1e-15 && (v[1] + s).abs() < 1e-15);
        assert!(norm_inf(&j.tr_mul(&v)) <= j.tol_rank);
        assert_eq!(j.kernel_basis, vec![vec![0.0, 1.0]]);
    }

    #[test]
    fn kernel_is_orthonormal_and_annihilated() {
        let j = Jacobian::new(vec![vec![1.0, 2.0, 3.0]], 3, 1e-10);
        assert_eq!(j.rank, 1);
        assert_eq!(j.kernel_basis.len(), 2);
        for k in &j.kernel_basis {
            assert!((norm2(k) - 1.0).abs() < 1e-12);
            assert!(dot(k, &j.rows[0]).abs() < 1e-12);
        }
        assert!(dot(&j.kernel_basis[0], &j.kernel_basis[1]).abs() < 1e-12);
        let w = j.solve_transpose(&[2.0, 4.0, 6.0]).unwrap();
        assert!((w[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn empty_jacobian() {
        let j = Jacobian::new(vec![], 2, 1e-10);
        assert!(j.is_onto());
        assert_eq!(j.kernel_basis.len(), 2);
        assert_eq!(j.solve_transpose(&[1.0, 0.0]), Some(vec![]));
    }

    #[test]
    fn convex_set_examples() {
        let orthant = Polyhedron::cone(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let r = convex_set_multiplier(&orthant, &[0.0, 3.0], &[1.0, 0.0], 1e-8).unwrap();
        assert!(r.pass);
        let r = convex_set_multiplier(&orthant, &[1.0, 0.0], &[1.0, 0.0], 1e-8).unwrap();
        assert!(r.in_dual_recession && !r.attains && !r.pass);
        let a = Polyhedron::new(2, vec![vec![1.0, 1.0], vec![1.0, 0.0]], vec![1.0, 0.0]).unwrap();
        let s = 0.5f64.sqrt();
        let r = convex_set_multiplier(&a, &[0.5, 0.5], &[s, s], 1e-8).unwrap();
        assert!(r.pass);
        assert!((r.minimum.unwrap() - s).abs() < 1e-12);
        // not in the dual of the recession cone: unbounded below
        let r = convex_set_multiplier(&a, &[0.5, 0.5], &[0.0, 1.0], 1e-8).unwrap();
        assert!(!r.in_dual_recession && !r.pass);
        assert!(r.ray.is_some());
    }
}
