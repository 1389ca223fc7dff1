use serde::{Deserialize, Serialize};

use super::simplex::{LinearProgram, LpStatus, Relation};
use super::{GeometryError, TOL_LP};
use crate::linalg::{combination, echelon, norm_inf, sub, Matrix};
use crate::par::{self, Execution};
use crate::tag::Tag;

/// Convex hull of a finite generator list (V-representation only).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hull {
    dim: usize,
    generators: Vec<Vec<f64>>,
    tags: Vec<Tag>,
}

impl Hull {
    /// Generators tagged `Constraint(0..n)`.
    pub fn new(dim: usize, generators: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let tags = (0..generators.len()).map(Tag::Constraint).collect();
        Hull::with_tags(dim, generators, tags)
    }

    pub fn with_tags(
        dim: usize,
        generators: Vec<Vec<f64>>,
        tags: Vec<Tag>,
    ) -> Result<Self, GeometryError> {
        assert_eq!(generators.len(), tags.len(), "one tag per generator");
        for g in &generators {
            if g.len() != dim {
                return Err(GeometryError::Dimension {
                    expected: dim,
                    got: g.len(),
                });
            }
        }
        Ok(Hull {
            dim,
            generators,
            tags,
        })
    }

    pub fn empty(dim: usize) -> Self {
        Hull {
            dim,
            generators: Vec::new(),
            tags: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn generators(&self) -> &[Vec<f64>] {
        &self.generators
    }

    pub fn tags(&self) -> &[Tag] {
        &self.tags
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Tag, &Vec<f64>)> {
        self.tags.iter().zip(&self.generators)
    }

    /// Sub-hull on the generators whose tags satisfy `keep`.
    pub fn filter(&self, mut keep: impl FnMut(&Tag, &[f64]) -> bool) -> Hull {
        let mut out = Hull::empty(self.dim);
        for (t, g) in self.iter() {
            if keep(t, g) {
                out.generators.push(g.clone());
                out.tags.push(t.clone());
            }
        }
        out
    }

    /// `Σ coeffs[i] * generators[i]`.
    pub fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        combination(&self.generators, coeffs, self.dim)
    }

    /// Applies a linear map to every generator, keeping tags.
    pub fn map(&self, dim: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Hull {
        Hull {
            dim,
            generators: self.generators.iter().map(|g| f(g)).collect(),
            tags: self.tags.clone(),
        }
    }

    fn check(&self, v: &[f64]) -> Result<(), GeometryError> {
        if self.generators.is_empty() {
            return Err(GeometryError::EmptyHull);
        }
        if v.len() != self.dim {
            return Err(GeometryError::Dimension {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Membership {
    pub member: bool,
    /// Convex coefficients of the closest point found.
    pub coeffs: Vec<f64>,
    /// Sup-norm distance from the target to that point.
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentMembership {
    pub member: bool,
    /// Weight on the endpoint `w`.
    pub lambda: f64,
    /// Convex coefficients over the hull generators (all zero when `lambda == 1`).
    pub coeffs: Vec<f64>,
    pub distance: f64,
}

/// Sup-norm distance from `target` to `conv(hull)`, with the minimizing
/// convex coefficients.
pub fn hull_distance(target: &[f64], hull: &Hull, tol_lp: f64) -> Result<(f64, Vec<f64>), GeometryError> {
    hull.check(target)?;
    let n = hull.len();
    let p = hull.dim();
    let s = n;
    let mut lp = LinearProgram::new(n + 1);
    lp.set_cost(s, 1.0);
    let mut ones = vec![1.0; n + 1];
    ones[s] = 0.0;
    lp.add_row(ones, Relation::Eq, 1.0);
    for j in 0..p {
        let mut row: Vec<f64> = hull.generators.iter().map(|g| g[j]).collect();
        row.push(-1.0);
        lp.add_row(row.clone(), Relation::Le, target[j]);
        row[s] = 1.0;
        lp.add_row(row, Relation::Ge, target[j]);
    }
    let sol = lp.solve(tol_lp)?;
    if sol.status != LpStatus::Optimal {
        return Err(super::LpError::Numerical(f64::NAN).into());
    }
    let coeffs = normalize(&sol.point[..n]);
    let distance = norm_inf(&sub(&hull.combine(&coeffs), target));
    Ok((distance, coeffs))
}

fn normalize(alpha: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = alpha.iter().map(|a| a.max(0.0)).collect();
    let total: f64 = clamped.iter().sum();
    if total > 0.0 {
        clamped.iter().map(|a| a / total).collect()
    } else {
        clamped
    }
}

/// Decides `target ∈ conv(hull)` up to sup-norm distance `tol`.
pub fn hull_member(target: &[f64], hull: &Hull, tol: f64) -> Result<Membership, GeometryError> {
    let tol_lp = TOL_LP.min(tol);
    let (distance, coeffs) = hull_distance(target, hull, tol_lp)?;
    let member = distance <= tol;
    if member && hull.len() > hull.dim() + 1 {
        if let Some(canon) = canonical_coeffs(target, hull, 0.5 * (distance + tol), tol_lp) {
            let d = norm_inf(&sub(&hull.combine(&canon), target));
            if d <= tol {
                return Ok(Membership { member, coeffs: canon, distance: d });
            }
        }
    }
    Ok(Membership { member, coeffs, distance })
}

/// Picks one representation out of the (possibly non-unique) set of convex
/// coefficients within sup-distance `bound` of `target`, by minimizing a
/// fixed generic weight. The set, and so the choice, is invariant under a
/// common positive scaling of target, generators and bound.
fn canonical_coeffs(target: &[f64], hull: &Hull, bound: f64, tol_lp: f64) -> Option<Vec<f64>> {
    let n = hull.len();
    let mut lp = LinearProgram::new(n);
    for i in 0..n {
        // Fractional parts of multiples of the golden ratio: distinct, no
        // rational relations among small subsets.
        let w = 1.0 + ((i + 1) as f64 * 0.618_033_988_749_895).fract();
        lp.set_cost(i, w);
    }
    lp.add_row(vec![1.0; n], Relation::Eq, 1.0);
    for j in 0..hull.dim() {
        let row: Vec<f64> = hull.generators.iter().map(|g| g[j]).collect();
        lp.add_row(row.clone(), Relation::Le, target[j] + bound);
        lp.add_row(row, Relation::Ge, target[j] - bound);
    }
    let sol = lp.solve(tol_lp).ok()?;
    (sol.status == LpStatus::Optimal).then(|| normalize(&sol.point))
}

/// Decides `target ∈ [w, conv(hull)] = {λw + (1-λ)y : λ ∈ [0,1], y ∈ conv(hull)}`
/// with a single program over `(λ, α)`.
pub fn segment_hull_member(
    target: &[f64],
    w: &[f64],
    hull: &Hull,
    tol: f64,
) -> Result<SegmentMembership, GeometryError> {
    hull.check(target)?;
    hull.check(w)?;
    let n = hull.len();
    let p = hull.dim();
    // variables: λ, α_1..α_n (α already scaled by 1-λ), s
    let s = n + 1;
    let mut lp = LinearProgram::new(n + 2);
    lp.set_bounds(0, 0.0, 1.0);
    lp.set_cost(s, 1.0);
    let mut ones = vec![1.0; n + 2];
    ones[s] = 0.0;
    lp.add_row(ones, Relation::Eq, 1.0);
    for j in 0..p {
        let mut row = Vec::with_capacity(n + 2);
        row.push(w[j]);
        row.extend(hull.generators.iter().map(|g| g[j]));
        row.push(-1.0);
        lp.add_row(row.clone(), Relation::Le, target[j]);
        row[s] = 1.0;
        lp.add_row(row, Relation::Ge, target[j]);
    }
    let sol = lp.solve(TOL_LP.min(tol))?;
    if sol.status != LpStatus::Optimal {
        return Err(super::LpError::Numerical(f64::NAN).into());
    }
    let lambda = sol.point[0].clamp(0.0, 1.0);
    let scaled: Vec<f64> = sol.point[1..=n].iter().map(|a| a.max(0.0)).collect();
    let mass: f64 = scaled.iter().sum();
    let coeffs = if mass > 0.0 {
        scaled.iter().map(|a| a / mass).collect()
    } else {
        vec![0.0; n]
    };
    let mut point = hull.combine(&scaled);
    crate::linalg::axpy(&mut point, lambda, w);
    let distance = norm_inf(&sub(&point, target));
    Ok(SegmentMembership {
        member: distance <= tol,
        lambda: if mass > 0.0 { lambda } else { 1.0 },
        coeffs,
        distance,
    })
}

/// Among points of `[w, hull]` within `cap` (sup norm) of `target`, one
/// with the largest weight on `w`. `None` when there is no such point.
pub fn segment_max_weight(
    target: &[f64],
    w: &[f64],
    hull: &Hull,
    cap: f64,
) -> Result<Option<SegmentMembership>, GeometryError> {
    hull.check(target)?;
    hull.check(w)?;
    let n = hull.len();
    let mut lp = LinearProgram::new(n + 1);
    lp.set_bounds(0, 0.0, 1.0);
    lp.set_cost(0, -1.0);
    lp.add_row(vec![1.0; n + 1], Relation::Eq, 1.0);
    for j in 0..hull.dim() {
        let mut row = Vec::with_capacity(n + 1);
        row.push(w[j]);
        row.extend(hull.generators.iter().map(|g| g[j]));
        lp.add_row(row.clone(), Relation::Le, target[j] + cap);
        lp.add_row(row, Relation::Ge, target[j] - cap);
    }
    let sol = match lp.solve(TOL_LP) {
        Ok(sol) if sol.status == LpStatus::Optimal => sol,
        Ok(_) | Err(super::LpError::Numerical(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let lambda = sol.point[0].clamp(0.0, 1.0);
    let scaled: Vec<f64> = sol.point[1..].iter().map(|a| a.max(0.0)).collect();
    let mass: f64 = scaled.iter().sum();
    if mass <= 0.0 {
        return Ok(None);
    }
    let mut point = hull.combine(&scaled);
    crate::linalg::axpy(&mut point, lambda, w);
    Ok(Some(SegmentMembership {
        member: true,
        lambda,
        coeffs: scaled.iter().map(|a| a / mass).collect(),
        distance: norm_inf(&sub(&point, target)),
    }))
}

/// Rewrites a convex representation of `target` over an affinely independent
/// subset of the generators (hence at most `dim + 1` of them).
///
/// Each step finds an affine dependence `μ` on the current support
/// (`Σ μᵢ gᵢ = 0`, `Σ μᵢ = 0`), moves the coefficients along `-μ` until one
/// vanishes, and drops it; ties go to the lowest index. Returns the surviving
/// indices in increasing order with their coefficients.
pub fn caratheodory_reduce(
    target: &[f64],
    hull: &Hull,
    coeffs: &[f64],
    tol: f64,
) -> Result<(Vec<usize>, Vec<f64>), GeometryError> {
    hull.check(target)?;
    if coeffs.len() != hull.len() {
        return Err(GeometryError::InvalidRepresentation(format!(
            "{} coefficients for {} generators",
            coeffs.len(),
            hull.len()
        )));
    }
    if let Some((i, a)) = coeffs.iter().enumerate().find(|(_, a)| **a < -tol || !a.is_finite()) {
        return Err(GeometryError::InvalidRepresentation(format!(
            "coefficient {i} is {a}"
        )));
    }
    let total: f64 = coeffs.iter().sum();
    if (total - 1.0).abs() > tol {
        return Err(GeometryError::InvalidRepresentation(format!(
            "coefficients sum to {total}"
        )));
    }
    let residual = norm_inf(&sub(&hull.combine(coeffs), target));
    let scale = 1.0 + norm_inf(target);
    if residual > tol * scale {
        return Err(GeometryError::InvalidRepresentation(format!(
            "combination misses the target by {residual:e}"
        )));
    }

    let mut support: Vec<usize> = (0..hull.len()).filter(|&i| coeffs[i] > 0.0).collect();
    let mut alpha: Vec<f64> = support.iter().map(|&i| coeffs[i]).collect();
    let p = hull.dim();
    let magnitude = hull
        .generators
        .iter()
        .map(|g| norm_inf(g))
        .fold(1.0, f64::max);

    loop {
        let k = support.len();
        if k <= 1 {
            break;
        }
        let mut m = Matrix::zeros(p + 1, k);
        for (c, &i) in support.iter().enumerate() {
            for r in 0..p {
                m.set(r, c, hull.generators[i][r]);
            }
            m.set(p, c, 1.0);
        }
        let e = echelon(&m, 1e-10 * magnitude);
        if e.rank() == k {
            break;
        }
        let base = e.null_space().swap_remove(0);
        // Try both orientations; prefer the step that zeroes the most
        // coefficients at once, then the one whose first casualty has the
        // lowest index.
        let mut choice: Option<(Vec<usize>, f64, Vec<f64>)> = None;
        for sign in [1.0, -1.0] {
            let mu: Vec<f64> = base.iter().map(|v| sign * v).collect();
            let ratios: Vec<Option<f64>> = alpha
                .iter()
                .zip(&mu)
                .map(|(&a, &m)| (m > 1e-14).then(|| a / m))
                .collect();
            let Some(theta) = ratios.iter().flatten().copied().reduce(f64::min) else {
                continue;
            };
            let hits: Vec<usize> = ratios
                .iter()
                .enumerate()
                .filter(|(_, r)| r.is_some_and(|r| r <= theta + 1e-12 * (1.0 + theta)))
                .map(|(c, _)| c)
                .collect();
            let better = match &choice {
                None => true,
                Some((best, _, _)) => {
                    hits.len() > best.len() || (hits.len() == best.len() && hits[0] < best[0])
                }
            };
            if better {
                choice = Some((hits, theta, mu));
            }
        }
        let Some((hits, theta, mu)) = choice else { break };
        for (a, m) in alpha.iter_mut().zip(&mu) {
            *a -= theta * m;
        }
        for c in hits {
            alpha[c] = 0.0;
        }
        let mut c = 0;
        support.retain(|_| {
            let keep = alpha[c] > 1e-15;
            c += 1;
            keep
        });
        alpha.retain(|&a| a > 1e-15);
    }
    let total: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= total);
    Ok((support, alpha))
}

/// One-sided gap `max_{g ∈ from} dist(g, conv(to))` in the sup norm.
pub fn hull_gap(from: &Hull, to: &Hull, tol_lp: f64, exec: Execution) -> Result<f64, GeometryError> {
    if from.is_empty() {
        return Ok(0.0);
    }
    let d = par::try_map(exec, from.generators(), |g| {
        hull_distance(g, to, tol_lp).map(|(d, _)| d)
    })?;
    Ok(d.into_iter().fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hull(gens: &[[f64; 2]]) -> Hull {
        Hull::new(2, gens.iter().map(|g| g.to_vec()).collect()).unwrap()
    }

    /// Minimum sup-distance from `target` to points Σαg with α on a grid of the
    /// simplex for two generators.
    fn grid_distance_2(target: &[f64], h: &Hull, steps: usize) -> (f64, f64) {
        (0..=steps)
            .map(|i| {
                let a = i as f64 / steps as f64;
                let p = h.combine(&[a, 1.0 - a]);
                (norm_inf(&sub(&p, target)), a)
            })
            .fold((f64::INFINITY, 0.0), |best, x| if x.0 < best.0 { x } else { best })
    }

    #[test]
    fn symmetric_triangle_contains_origin() {
        let h = hull(&[[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]]);
        let m = hull_member(&[0.0, 0.0], &h, 1e-8).unwrap();
        assert!(m.member);
        for a in &m.coeffs {
            assert!((a - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn origin_outside_counterexample_segment() {
        let h = hull(&[[0.0, -1.0], [1.0, 0.0]]);
        let m = hull_member(&[0.0, 0.0], &h, 1e-8).unwrap();
        assert!(!m.member);
        // sup-distance from 0 to the segment is 1/2, attained at (1/2, -1/2)
        assert!((m.distance - 0.5).abs() < 1e-12);
    }

    #[test]
    fn edge_point_coefficients_match_grid_oracle() {
        let h = hull(&[[1.0, 0.0], [0.0, 1.0]]);
        let target = [0.25, 0.75];
        let (gd, ga) = grid_distance_2(&target, &h, 10_000);
        assert!(gd < 1e-12);
        assert!((ga - 0.25).abs() < 1e-12);
        let m = hull_member(&target, &h, 1e-8).unwrap();
        assert!(m.member);
        assert!((m.coeffs[0] - 0.25).abs() < 1e-12 && (m.coeffs[1] - 0.75).abs() < 1e-12);
    }

    #[test]
    fn single_generator_is_a_distance_test() {
        let h = hull(&[[1.0, 2.0]]);
        assert!(hull_member(&[1.0, 2.0], &h, 1e-8).unwrap().member);
        let m = hull_member(&[1.0, 2.5], &h, 1e-8).unwrap();
        assert!(!m.member);
        assert!((m.distance - 0.5).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let h = hull(&[[1.0, 0.0]]);
        assert!(matches!(
            hull_member(&[0.0], &h, 1e-8),
            Err(GeometryError::Dimension { .. })
        ));
        assert!(matches!(
            hull_member(&[0.0, 0.0], &Hull::empty(2), 1e-8),
            Err(GeometryError::EmptyHull)
        ));
    }

    #[test]
    fn segment_counterexample() {
        let h = hull(&[[1.0, 0.0], [0.0, 1.0]]);
        let s = segment_hull_member(&[0.0, 0.0], &[0.0, -1.0], &h, 1e-8).unwrap();
        assert!(s.member);
        assert!((s.lambda - 0.5).abs() < 1e-12);
        assert!(s.coeffs[0].abs() < 1e-12 && (s.coeffs[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn segment_endpoint() {
        let h = hull(&[[1.0, 0.0], [0.0, 1.0]]);
        let w = [3.0, -2.0];
        let s = segment_hull_member(&w, &w, &h, 1e-8).unwrap();
        assert!(s.member);
        assert!((s.lambda - 1.0).abs() < 1e-12);
    }

    #[test]
    fn segment_miss_matches_grid_oracle() {
        let h = hull(&[[1.0, 0.0]]);
        let target = [1.0, 1.0];
        // oracle: points λ·0 + (1-λ)e1 on a grid
        let best = (0..=10_000)
            .map(|i| {
                let l = i as f64 / 10_000.0;
                norm_inf(&sub(&[1.0 - l, 0.0], &target))
            })
            .fold(f64::INFINITY, f64::min);
        assert!(best >= 1.0 - 1e-12);
        let s = segment_hull_member(&target, &[0.0, 0.0], &h, 1e-8).unwrap();
        assert!(!s.member);
        assert!((s.distance - best).abs() < 1e-9);
    }

    #[test]
    fn caratheodory_square() {
        let h = hull(&[[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]]);
        let (idx, a) = caratheodory_reduce(&[0.0, 0.0], &h, &[0.25; 4], 1e-9).unwrap();
        assert!(idx.len() <= 3);
        let sub_hull = Hull::new(2, idx.iter().map(|&i| h.generators()[i].clone()).collect()).unwrap();
        let p = sub_hull.combine(&a);
        assert!(norm_inf(&p) <= 1e-12);
        // independent check through the membership program
        assert!(hull_member(&[0.0, 0.0], &sub_hull, 1e-9).unwrap().member);
        assert!(a.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn caratheodory_fixed_point() {
        let h = hull(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]);
        let coeffs = [0.2, 0.3, 0.5];
        let target = h.combine(&coeffs);
        let (idx, a) = caratheodory_reduce(&target, &h, &coeffs, 1e-9).unwrap();
        assert_eq!(idx, vec![0, 1, 2]);
        for (x, y) in a.iter().zip(&coeffs) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn caratheodory_exact_coincidence() {
        let h = hull(&[[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]);
        let (idx, a) = caratheodory_reduce(&[0.5, 0.5], &h, &[0.25, 0.25, 0.5], 1e-9).unwrap();
        assert_eq!(idx, vec![2]);
        assert_eq!(a, vec![1.0]);
    }

    #[test]
    fn caratheodory_rejects_bad_input() {
        let h = hull(&[[1.0, 0.0], [0.0, 1.0]]);
        assert!(caratheodory_reduce(&[0.5, 0.5], &h, &[0.5, 0.4], 1e-9).is_err());
        assert!(caratheodory_reduce(&[0.9, 0.5], &h, &[0.5, 0.5], 1e-9).is_err());
        assert!(caratheodory_reduce(&[0.5, 0.5], &h, &[1.5, -0.5], 1e-9).is_err());
    }

    #[test]
    fn gap_is_zero_for_subset_direction() {
        let big = hull(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]);
        let small = hull(&[[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(hull_gap(&small, &big, 1e-9, Execution::Sequential).unwrap(), 0.0);
        let g = hull_gap(&big, &small, 1e-9, Execution::Sequential).unwrap();
        assert!((g - 0.5).abs() < 1e-12);
    }
}
