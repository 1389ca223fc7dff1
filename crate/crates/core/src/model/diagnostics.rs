use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::snapshot::{family_members, inner_image, member_value, Snapshot};
use super::{ConstraintFamily, ModelError, Options, Problem};
use crate::geometry::{hull_member, minimize_over, Hull, LpStatus};
use crate::linalg::{norm2, sub};
use crate::par;
use crate::tag::Tag;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Feasibility {
    pub feasible: bool,
    /// Smallest member value (`None` without an inequality family).
    pub infimum: Option<f64>,
    pub argmin: Option<Tag>,
    /// Members below `-tol_feas`, in member order.
    pub violated: Vec<(Tag, f64)>,
    /// `infimum ≤ tol_feas`: the candidate sits on the boundary.
    pub boundary: bool,
    /// `max |hᵢ(x̂)|`, when there are equality constraints.
    pub equality_residual: Option<f64>,
    /// `g(x̂)`, when there is an inner map.
    pub image: Option<Vec<f64>>,
    pub members: usize,
    pub refined: usize,
}

impl Feasibility {
    pub(crate) fn from_snapshot(
        prob: &Problem,
        x: &[f64],
        snap: &Snapshot<'_>,
        opts: &Options,
    ) -> Result<Self, ModelError> {
        let inf = snap.infimum();
        let violated: Vec<(Tag, f64)> = snap
            .values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v < -opts.tol_feas)
            .map(|(i, &v)| (snap.tag(i).clone(), v))
            .collect();
        let equality_residual = match prob.equality() {
            None => None,
            Some(h) => {
                let mut worst: f64 = 0.0;
                for (i, hi) in h.iter().enumerate() {
                    let v = hi
                        .eval(x, &[])
                        .map_err(|e| ModelError::eval(format!("equality {}", i + 1), e))?;
                    worst = worst.max(v.abs());
                }
                Some(worst)
            }
        };
        let eq_ok = equality_residual.is_none_or(|r| r <= opts.tol_feas);
        Ok(Feasibility {
            feasible: violated.is_empty() && eq_ok,
            infimum: inf.map(|(_, v)| v),
            argmin: inf.map(|(i, _)| snap.tag(i).clone()),
            violated,
            boundary: inf.is_some_and(|(_, v)| v <= opts.tol_feas),
            equality_residual,
            image: snap.image().map(<[f64]>::to_vec),
            members: snap.len(),
            refined: snap.refined(),
        })
    }
}

/// Evaluates the whole family at `x` and reports the smallest value.
pub fn feasibility(prob: &Problem, x: &[f64], opts: &Options) -> Result<Feasibility, ModelError> {
    let snap = Snapshot::new(prob, x, opts)?;
    Feasibility::from_snapshot(prob, x, &snap, opts)
}

/// Feasibility report, or an `Infeasible` error naming the worst violation.
pub(crate) fn require_feasible(
    prob: &Problem,
    x: &[f64],
    snap: &Snapshot<'_>,
    opts: &Options,
) -> Result<Feasibility, ModelError> {
    let f = Feasibility::from_snapshot(prob, x, snap, opts)?;
    if let Some((tag, v)) = f
        .violated
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
    {
        return Err(ModelError::Infeasible {
            tag: tag.to_string(),
            value: *v,
        });
    }
    if let (Some(h), Some(r)) = (prob.equality(), f.equality_residual) {
        if r > opts.tol_feas {
            let worst = h
                .iter()
                .enumerate()
                .map(|(i, hi)| (i, hi.eval(x, &[]).unwrap_or(f64::NAN)))
                .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
                .expect("at least one equality");
            return Err(ModelError::Infeasible {
                tag: format!("equality {}", worst.0 + 1),
                value: worst.1,
            });
        }
    }
    Ok(f)
}

/// Uniform sample from the Euclidean ball of radius `r` around `c`.
fn ball_point(rng: &mut ChaCha8Rng, c: &[f64], r: f64) -> Vec<f64> {
    let dir: Vec<f64> = (0..c.len()).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm2(&dir);
    let rad = r * rng.gen::<f64>().powf(1.0 / c.len() as f64);
    c.iter()
        .zip(&dir)
        .map(|(ci, di)| ci + rad * di / n.max(f64::MIN_POSITIVE))
        .collect()
}

/// Sampled lower bound on the common Lipschitz modulus of the family on the
/// ball `B(center, radius)`, where the center is `g(x̂)` when there is an
/// inner map and `x̂` otherwise.
///
/// Pair `i` depends only on `seed` and `i`, so the estimate is nondecreasing
/// in `samples`.
pub fn equi_lipschitz_estimate(
    prob: &Problem,
    x: &[f64],
    radius: f64,
    samples: usize,
    seed: u64,
    opts: &Options,
) -> Result<f64, ModelError> {
    prob.check_point(x)?;
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(ModelError::Invalid(format!("radius must be positive, got {radius}")));
    }
    let center = match inner_image(prob, x, opts)? {
        Some((y, _)) => y,
        None => x.to_vec(),
    };
    let members = family_members(prob, opts);
    if members.is_empty() {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..samples)
        .map(|_| {
            let u = ball_point(&mut rng, &center, radius);
            let v = ball_point(&mut rng, &center, radius);
            (u, v)
        })
        .collect();
    let ratios = par::try_map(opts.execution, &pairs, |(u, v)| {
        let d = norm2(&sub(u, v));
        if d == 0.0 {
            return Ok::<f64, ModelError>(0.0);
        }
        let mut best: f64 = 0.0;
        for m in &members {
            let a = member_value(prob, m, u)?;
            let b = member_value(prob, m, v)?;
            best = best.max((a - b).abs() / d);
        }
        Ok(best)
    })?;
    Ok(ratios.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Admissibility {
    /// 0 is outside the closed hull of all member gradients.
    Admissible,
    /// 0 lies in that hull; only the weaker notion can hold.
    WeakAdmissible,
}

/// Determining functional `y ↦ uᵀy − inf_A uᵀy` for a unit normal `u`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Determination {
    pub tag: Tag,
    pub unit_normal: Vec<f64>,
    /// `inf_A uᵀy` (`None` when unbounded below).
    pub infimum: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibleReport {
    pub status: Admissibility,
    pub zero_in_hull: bool,
    /// Sup-norm distance from 0 to the hull of all member gradients.
    pub hull_distance: Option<f64>,
    pub active_members: usize,
    pub zero_in_active_hull: bool,
    pub active_hull_distance: Option<f64>,
    pub lipschitz: f64,
    pub determination: Option<Vec<Determination>>,
    pub assumptions: Vec<String>,
}

/// Samples used by [`admissible_diagnostics`] for the Lipschitz estimate.
pub const LIPSCHITZ_SAMPLES: usize = 256;

/// Admissibility indicators of the constraint family at `x`, computed in the
/// family's own space (at `g(x̂)` when there is an inner map).
pub fn admissible_diagnostics(
    prob: &Problem,
    x: &[f64],
    eps: f64,
    seed: u64,
    opts: &Options,
) -> Result<AdmissibleReport, ModelError> {
    let mut snap = Snapshot::new(prob, x, opts)?;
    require_feasible(prob, x, &snap, opts)?;

    let family_hull = |set: &super::ActiveSet| -> Hull {
        set.outer_hull().unwrap_or_else(|| set.hull())
    };
    let distance = |h: &Hull| -> Result<Option<f64>, ModelError> {
        if h.is_empty() {
            return Ok(None);
        }
        Ok(Some(hull_member(&vec![0.0; h.dim()], h, opts.tol)?.distance))
    };
    let all = family_hull(&snap.all()?);
    let active = family_hull(&snap.active(eps)?);
    let hull_distance = distance(&all)?;
    let active_hull_distance = distance(&active)?;
    let zero_in_hull = hull_distance.is_some_and(|d| d <= opts.tol);
    let zero_in_active_hull = active_hull_distance.is_some_and(|d| d <= opts.tol);

    let radius = 0.1;
    let lipschitz = equi_lipschitz_estimate(prob, x, radius, LIPSCHITZ_SAMPLES, seed, opts)?;

    let determination = match prob.inequality() {
        Some(ConstraintFamily::Polyhedral(a)) => {
            let mut out = Vec::with_capacity(a.len());
            for j in 0..a.len() {
                let u = a.unit_normal(j);
                let sol = minimize_over(a, &u, opts.tol_lp)?;
                out.push(Determination {
                    tag: Tag::Normal(j),
                    infimum: (sol.status == LpStatus::Optimal).then_some(sol.objective),
                    unit_normal: u,
                });
            }
            Some(out)
        }
        _ => None,
    };

    let mut assumptions = vec![
        "inactive members are assumed equi-lower-semicontinuous (no finite certificate exists)"
            .to_string(),
        format!(
            "Lipschitz modulus is a sampled lower bound ({LIPSCHITZ_SAMPLES} pairs, radius {radius})"
        ),
    ];
    if prob.inequality().is_some_and(ConstraintFamily::has_sequences) {
        assumptions.push(format!(
            "countable sequences truncated at k_max = {} plus their limit",
            opts.k_max
        ));
    }
    if matches!(prob.inequality(), Some(ConstraintFamily::Parametric { .. })) {
        assumptions.push("parametric index set sampled on its grid; the true hull may be larger".into());
    }

    Ok(AdmissibleReport {
        status: if zero_in_hull {
            Admissibility::WeakAdmissible
        } else {
            Admissibility::Admissible
        },
        zero_in_hull,
        hull_distance,
        active_members: active.len(),
        zero_in_active_hull,
        active_hull_distance,
        lipschitz,
        determination,
        assumptions,
    })
}
