use serde::Serialize;

use super::{ConstraintFamily, FamilyMember, IndexSet, ModelError, Options, Problem};
use crate::exprlang::ExprFn;
use crate::geometry::Hull;
use crate::linalg::{dot, solve_square, Matrix};
use crate::par;
use crate::tag::Tag;

/// One family member with its value and gradient at the candidate point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveEntry {
    pub tag: Tag,
    /// Value at the candidate, with tolerable negatives clamped to 0.
    pub value: f64,
    /// Gradient in the decision space `ℝᵖ` (chained through the inner map).
    pub gradient: Vec<f64>,
    /// Gradient in the family's own space `ℝ^q`, when there is an inner map.
    pub outer_gradient: Option<Vec<f64>>,
}

/// Members with `0 ≤ value ≤ eps`, in family order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ActiveSet {
    pub eps: f64,
    pub dim: usize,
    pub entries: Vec<ActiveEntry>,
}

impl ActiveSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tags(&self) -> Vec<Tag> {
        self.entries.iter().map(|e| e.tag.clone()).collect()
    }

    pub fn hull(&self) -> Hull {
        Hull::with_tags(
            self.dim,
            self.entries.iter().map(|e| e.gradient.clone()).collect(),
            self.tags(),
        )
        .expect("gradients have the decision dimension")
    }

    /// Hull of the pre-chain gradients, when there is an inner map.
    pub fn outer_hull(&self) -> Option<Hull> {
        let first = self.entries.first()?.outer_gradient.as_ref()?;
        let q = first.len();
        let gens = self
            .entries
            .iter()
            .map(|e| e.outer_gradient.clone())
            .collect::<Option<Vec<_>>>()?;
        Some(Hull::with_tags(q, gens, self.tags()).expect("uniform outer dimension"))
    }

    pub fn filter(&self, mut keep: impl FnMut(&ActiveEntry) -> bool) -> ActiveSet {
        ActiveSet {
            eps: self.eps,
            dim: self.dim,
            entries: self.entries.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Source {
    /// Finite member `i` (or the parametric `h` when `None`) at index value `t`.
    Expr(Option<usize>, Vec<f64>),
    Normal(usize),
}

#[derive(Debug, Clone)]
pub(crate) struct Member {
    pub tag: Tag,
    pub source: Source,
}

/// Declared members of the family, with sequences truncated at `k_max` and
/// box index sets replaced by their base grid.
pub(crate) fn family_members(prob: &Problem, opts: &Options) -> Vec<Member> {
    let mut out = Vec::new();
    match prob.inequality() {
        None => {}
        Some(ConstraintFamily::Finite(ms)) => {
            for (i, m) in ms.iter().enumerate() {
                match m {
                    FamilyMember::Single(_) => out.push(Member {
                        tag: Tag::Constraint(i),
                        source: Source::Expr(Some(i), vec![]),
                    }),
                    FamilyMember::Sequence(_) => {
                        for k in 1..=opts.k_max {
                            out.push(Member {
                                tag: Tag::Sequence { member: i, k },
                                source: Source::Expr(Some(i), vec![1.0 / k as f64]),
                            });
                        }
                        out.push(Member {
                            tag: Tag::SequenceLimit { member: i },
                            source: Source::Expr(Some(i), vec![0.0]),
                        });
                    }
                }
            }
        }
        Some(ConstraintFamily::Parametric { index, .. }) => {
            for t in index.points() {
                out.push(Member {
                    tag: Tag::Parameter(t.clone()),
                    source: Source::Expr(None, t),
                });
            }
        }
        Some(ConstraintFamily::Polyhedral(a)) => {
            for j in 0..a.len() {
                out.push(Member {
                    tag: Tag::Normal(j),
                    source: Source::Normal(j),
                });
            }
        }
    }
    out
}

fn expr_of(prob: &Problem, idx: Option<usize>) -> &ExprFn {
    match (prob.inequality(), idx) {
        (Some(ConstraintFamily::Finite(ms)), Some(i)) => match &ms[i] {
            FamilyMember::Single(f) | FamilyMember::Sequence(f) => f,
        },
        (Some(ConstraintFamily::Parametric { h, .. }), None) => h,
        _ => unreachable!("member source does not match the family"),
    }
}

/// Value of a member at a point `y` of the family space.
pub(crate) fn member_value(prob: &Problem, m: &Member, y: &[f64]) -> Result<f64, ModelError> {
    match &m.source {
        Source::Expr(i, t) => expr_of(prob, *i)
            .eval(y, t)
            .map_err(|e| ModelError::eval(&m.tag, e)),
        Source::Normal(j) => match prob.inequality() {
            Some(ConstraintFamily::Polyhedral(a)) => Ok(a.slack(*j, y)),
            _ => unreachable!(),
        },
    }
}

fn member_gradient(
    prob: &Problem,
    m: &Member,
    y: &[f64],
    opts: &Options,
) -> Result<Vec<f64>, ModelError> {
    match &m.source {
        Source::Expr(i, t) => expr_of(prob, *i)
            .value_and_grad_with(y, t, opts.tol_kink)
            .map(|(_, g)| g)
            .map_err(|e| ModelError::eval(&m.tag, e)),
        Source::Normal(j) => match prob.inequality() {
            Some(ConstraintFamily::Polyhedral(a)) => Ok(a.unit_normal(*j)),
            _ => unreachable!(),
        },
    }
}

/// Image `g(x)` and Jacobian `J_g(x)` (q × p) of the inner map.
pub(crate) fn inner_image(
    prob: &Problem,
    x: &[f64],
    opts: &Options,
) -> Result<Option<(Vec<f64>, Matrix)>, ModelError> {
    let Some(g) = prob.inner_map() else {
        return Ok(None);
    };
    let mut y = Vec::with_capacity(g.len());
    let mut rows = Vec::with_capacity(g.len());
    for (i, gi) in g.iter().enumerate() {
        let (v, d) = gi
            .value_and_grad_with(x, &[], opts.tol_kink)
            .map_err(|e| ModelError::eval(format!("inner map component {}", i + 1), e))?;
        y.push(v);
        rows.push(d);
    }
    let jac = Matrix::from_rows(&rows, prob.dim());
    Ok(Some((y, jac)))
}

/// The whole (discretized and refined) family evaluated once at a candidate.
///
/// Values are computed eagerly; gradients are computed on first request and
/// cached, so members far from active never need to be differentiable.
#[derive(Debug, Clone)]
pub struct Snapshot<'p> {
    prob: &'p Problem,
    opts: Options,
    /// Evaluation point in the family space: `g(x̂)`, or `x̂` itself.
    y: Vec<f64>,
    image: Option<Vec<f64>>,
    jacobian: Option<Matrix>,
    members: Vec<Member>,
    values: Vec<f64>,
    gradients: Vec<Option<(Vec<f64>, Option<Vec<f64>>)>>,
    refined: usize,
}

impl<'p> Snapshot<'p> {
    pub fn new(prob: &'p Problem, x: &[f64], opts: &Options) -> Result<Self, ModelError> {
        prob.check_point(x)?;
        opts.validate()?;
        let (image, jacobian) = match inner_image(prob, x, opts)? {
            Some((y, j)) => (Some(y), Some(j)),
            None => (None, None),
        };
        let y: Vec<f64> = image.clone().unwrap_or_else(|| x.to_vec());
        let mut members = family_members(prob, opts);
        let mut values = par::try_map(opts.execution, &members, |m| member_value(prob, m, &y))?;

        let mut refined = 0;
        if let Some(ConstraintFamily::Parametric {
            h,
            index: index @ IndexSet::Box { lower, upper, grid },
        }) = prob.inequality()
        {
            let cell = index.cell().expect("box index set");
            let h_t = ExprFn::from_ast(h.ast().swap_xt(), h.arity_t(), h.arity_x())
                .expect("swapped arities match");
            // Searches from other near-active points run downhill into the
            // same minima, so only the grid's own local minima seed them.
            let seeds: Vec<usize> = (0..members.len())
                .filter(|&i| values[i] <= opts.eps0 && grid_local_min(&values, i, *grid, lower.len()))
                .collect();
            let found = par::try_map(opts.execution, &seeds, |&i| {
                let t0 = members[i].tag.parameter().expect("grid tag").to_vec();
                let (t, v) =
                    pattern_search(h, &y, t0, values[i], lower, upper, &cell, opts.refine_depth)?;
                let lattice = cell_scaled(&cell, opts.refine_depth);
                Ok::<_, ModelError>(polish(h, &h_t, &y, t, v, lower, upper, &lattice))
            })?;
            // Searches from neighbouring seeds converge to the same point up
            // to rounding; anything within a small fraction of the finest
            // lattice step is one point.
            let same = cell_scaled(&cell, opts.refine_depth + 20);
            let close = |a: &[f64], b: &[f64]| {
                a.iter().zip(b).zip(&same).all(|((x, y), s)| (x - y).abs() <= *s)
            };
            let grid_len = members.len();
            for ((t, v), &seed) in found.into_iter().zip(&seeds) {
                if close(&t, members[seed].tag.parameter().expect("grid tag")) {
                    continue;
                }
                let dup = members[grid_len..]
                    .iter()
                    .any(|m| close(&t, m.tag.parameter().expect("refined tag")));
                if !dup {
                    members.push(Member {
                        tag: Tag::Refined(t.clone()),
                        source: Source::Expr(None, t),
                    });
                    values.push(v);
                    refined += 1;
                }
            }
        }
        let n = members.len();
        Ok(Snapshot {
            prob,
            opts: opts.clone(),
            y,
            image,
            jacobian,
            members,
            values,
            gradients: vec![None; n],
            refined,
        })
    }

    pub fn problem(&self) -> &Problem {
        self.prob
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn tag(&self, i: usize) -> &Tag {
        &self.members[i].tag
    }

    /// Raw values, in member order.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of members added by local refinement.
    pub fn refined(&self) -> usize {
        self.refined
    }

    /// `g(x̂)` when there is an inner map.
    pub fn image(&self) -> Option<&[f64]> {
        self.image.as_deref()
    }

    pub fn jacobian(&self) -> Option<&Matrix> {
        self.jacobian.as_ref()
    }

    /// Smallest value and its member index (first in member order on ties).
    pub fn infimum(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .enumerate()
            .fold(None, |best, (i, &v)| match best {
                Some((_, b)) if b <= v => best,
                _ => Some((i, v)),
            })
    }

    fn ensure_gradients(&mut self, idx: &[usize]) -> Result<(), ModelError> {
        let missing: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| self.gradients[i].is_none())
            .collect();
        if missing.is_empty() {
            return Ok(());
        }
        let (prob, opts, members, jac, y) =
            (self.prob, &self.opts, &self.members, &self.jacobian, &self.y);
        let computed = par::try_map(opts.execution, &missing, |&i| {
            let m = &members[i];
            match jac {
                Some(j) => {
                    let outer = member_gradient(prob, m, y, opts)?;
                    Ok::<_, ModelError>((j.tr_mul_vec(&outer), Some(outer)))
                }
                None => Ok((member_gradient(prob, m, y, opts)?, None)),
            }
        })?;
        for (i, g) in missing.into_iter().zip(computed) {
            self.gradients[i] = Some(g);
        }
        Ok(())
    }

    fn selection(&mut self, idx: Vec<usize>, eps: f64) -> Result<ActiveSet, ModelError> {
        self.ensure_gradients(&idx)?;
        let entries = idx
            .into_iter()
            .map(|i| {
                let (g, outer) = self.gradients[i].clone().expect("computed above");
                ActiveEntry {
                    tag: self.members[i].tag.clone(),
                    value: self.values[i].max(0.0),
                    gradient: g,
                    outer_gradient: outer,
                }
            })
            .collect();
        Ok(ActiveSet {
            eps,
            dim: self.prob.dim(),
            entries,
        })
    }

    /// Members with value at most `max(eps, tol_feas)`.
    pub fn active(&mut self, eps: f64) -> Result<ActiveSet, ModelError> {
        let cut = eps.max(self.opts.tol_feas);
        let idx = (0..self.len()).filter(|&i| self.values[i] <= cut).collect();
        self.selection(idx, eps)
    }

    /// Every member, active or not.
    pub fn all(&mut self) -> Result<ActiveSet, ModelError> {
        let idx = (0..self.len()).collect();
        self.selection(idx, f64::INFINITY)
    }
}

/// Whether grid point `i` is no larger than any axis neighbour. Points are
/// row-major with the last axis fastest.
fn grid_local_min(values: &[f64], i: usize, grid: usize, m: usize) -> bool {
    let mut stride = 1;
    for _ in 0..m {
        let pos = (i / stride) % grid;
        if pos > 0 && values[i - stride] < values[i] {
            return false;
        }
        if pos + 1 < grid && values[i + stride] < values[i] {
            return false;
        }
        stride *= grid;
    }
    true
}

fn cell_scaled(cell: &[f64], levels: usize) -> Vec<f64> {
    cell.iter().map(|c| c * 0.5f64.powi(levels as i32)).collect()
}

/// Coordinate pattern search minimizing `h(y, ·)` over the box from a grid
/// point. Level `l` uses step `cell / 2^l`; a move is taken only on strict
/// improvement. Every iterate stays on the lattice `lower + j·cell/2^depth`,
/// so searches from neighbouring seeds end on the same point.
const MAX_MOVES_PER_LEVEL: usize = 1024;

#[allow(clippy::too_many_arguments)]
fn pattern_search(
    h: &ExprFn,
    y: &[f64],
    t0: Vec<f64>,
    v0: f64,
    lower: &[f64],
    upper: &[f64],
    cell: &[f64],
    depth: usize,
) -> Result<(Vec<f64>, f64), ModelError> {
    let mut t = t0;
    let mut best = v0;
    let eval = |t: &[f64]| {
        h.eval(y, t)
            .map_err(|e| ModelError::eval(Tag::Parameter(t.to_vec()), e))
    };
    for level in 1..=depth {
        let scale = 0.5f64.powi(level as i32);
        for _ in 0..MAX_MOVES_PER_LEVEL {
            let mut moved = false;
            for axis in 0..t.len() {
                let step = cell[axis] * scale;
                for dir in [-1.0, 1.0] {
                    let mut cand = t.clone();
                    cand[axis] = (t[axis] + dir * step).clamp(lower[axis], upper[axis]);
                    if cand[axis] == t[axis] {
                        continue;
                    }
                    let v = eval(&cand)?;
                    if v < best {
                        best = v;
                        t = cand;
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                break;
            }
        }
    }
    Ok((t, best))
}

/// Newton iterations on `∇ₜh(y, t) = 0` from a pattern-search point, with
/// coordinates pinned at a bound when descent would leave the box. Value
/// comparisons alone locate a smooth minimizer only to about `√ε`; the
/// stationarity condition pins it to rounding. The result is kept only if
/// it stays within one lattice step per axis and does not increase `h`.
#[allow(clippy::too_many_arguments)]
fn polish(
    h: &ExprFn,
    h_t: &ExprFn,
    y: &[f64],
    t0: Vec<f64>,
    v0: f64,
    lower: &[f64],
    upper: &[f64],
    lattice: &[f64],
) -> (Vec<f64>, f64) {
    let m = t0.len();
    let grad = |t: &[f64]| h_t.grad(t, y).ok();
    let mut t = t0.clone();
    for _ in 0..POLISH_ITERATIONS {
        let Some(g) = grad(&t) else { break };
        let free: Vec<usize> = (0..m)
            .filter(|&i| !((t[i] <= lower[i] && g[i] > 0.0) || (t[i] >= upper[i] && g[i] < 0.0)))
            .collect();
        if free.is_empty() {
            break;
        }
        // Hessian of the free block by central differences of the exact gradient.
        let k = free.len();
        let mut hess = Matrix::zeros(k, k);
        let mut ok = true;
        for (c, &j) in free.iter().enumerate() {
            let d = lattice[j] * 1e-3;
            let (mut up, mut dn) = (t.clone(), t.clone());
            up[j] += d;
            dn[j] -= d;
            match (grad(&up), grad(&dn)) {
                (Some(gu), Some(gd)) => {
                    for (r, &i) in free.iter().enumerate() {
                        hess.set(r, c, (gu[i] - gd[i]) / (2.0 * d));
                    }
                }
                _ => ok = false,
            }
        }
        if !ok {
            break;
        }
        let rhs: Vec<f64> = free.iter().map(|&i| -g[i]).collect();
        let Some(step) = solve_square(&hess, &rhs, 1e-12 * hess.max_abs()) else { break };
        // Only descend towards a minimum.
        if dot(&step, &rhs) <= 0.0 {
            break;
        }
        let mut next = t.clone();
        for (&i, s) in free.iter().zip(&step) {
            next[i] = (t[i] + s).clamp(lower[i], upper[i]);
        }
        let moved = free.iter().any(|&i| next[i] != t[i]);
        t = next;
        if !moved || free.iter().zip(&step).all(|(&i, s)| s.abs() <= 1e-15 * (1.0 + t[i].abs())) {
            break;
        }
    }
    let local = t.iter().zip(&t0).zip(lattice).all(|((a, b), l)| (a - b).abs() <= *l);
    match h.eval(y, &t) {
        Ok(v) if local && v <= v0 + 1e-13 * (1.0 + v0.abs()) => (t, v),
        _ => (t0, v0),
    }
}

const POLISH_ITERATIONS: usize = 20;

/// Feasibility-checked near-active set of `prob` at `x` (see [`Snapshot::active`]).
pub fn active_set(
    prob: &Problem,
    x: &[f64],
    eps: f64,
    opts: &Options,
) -> Result<ActiveSet, ModelError> {
    let mut snap = Snapshot::new(prob, x, opts)?;
    super::diagnostics::require_feasible(prob, x, &snap, opts)?;
    snap.active(eps)
}
