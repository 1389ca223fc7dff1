//! Near-active multiplier set `T_C(x̂)` and Fritz John / KKT certificates.
//!
//! `T_C(x̂)` is the intersection over shrinking `ε` of the hulls of gradients
//! of members with value in `[0, ε]`. It is approximated along the ladder
//! `ε_k = eps0 · shrinkᵏ`; the candidate is certified when
//! `0 ∈ [∇f(x̂), T_C(x̂)]`, i.e. `λ∇f(x̂) + βx* = 0` for some `x* ∈ T_C(x̂)`
//! and `λ + β = 1`, `λ, β ≥ 0`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    caratheodory_reduce, hull_gap, hull_member, segment_hull_member, segment_max_weight, GeometryError, Hull,
};
use crate::linalg::{axpy, dot, norm_inf, scale, sub};
use crate::model::{
    require_feasible_snapshot, ActiveSet, ConstraintFamily, Feasibility, ModelError, Options,
    Problem, Snapshot,
};
use crate::tag::Tag;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("problem has no parametric constraint family")]
    NotParametric,
    #[error("no constraint is active at the candidate")]
    NoActiveConstraint,
    #[error("no multiplier certificate (distance {distance:e})")]
    NoCertificate { distance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// No member is (near) active: `T_C(x̂)` is empty.
    Interior,
    /// Every surviving member is active to within `tol_feas`.
    AllActive,
    /// Two consecutive shrinking steps moved the hull by at most `tol_hull`.
    Stabilized,
    /// The ladder ran out of steps.
    MaxSteps,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderStep {
    pub eps: f64,
    pub hull: Hull,
    /// Largest distance from a generator dropped at this step to the new
    /// hull (0 when nothing was dropped, absent at the first step).
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TCApprox {
    pub ladder: Vec<LadderStep>,
    /// Hull at the last step reached.
    pub final_hull: Hull,
    /// Members behind `final_hull`, with values and pre-chain gradients.
    pub final_set: ActiveSet,
    pub converged: bool,
    pub stop: StopReason,
    pub hausdorff_gaps: Vec<f64>,
    /// The candidate is interior (`inf φ(x̂) > tol_feas`).
    pub interior: bool,
    pub feasibility: Feasibility,
}

/// Builds the ε-ladder of near-active gradient hulls at a feasible `x`.
pub fn tc_approx(prob: &Problem, x: &[f64], opts: &Options) -> Result<TCApprox, CertifyError> {
    let mut snap = Snapshot::new(prob, x, opts)?;
    let feasibility = require_feasible_snapshot(prob, x, &snap, opts)?;
    let p = prob.dim();
    if !feasibility.boundary {
        let final_set = ActiveSet {
            eps: 0.0,
            dim: p,
            entries: Vec::new(),
        };
        return Ok(TCApprox {
            ladder: Vec::new(),
            final_hull: Hull::empty(p),
            final_set,
            converged: true,
            stop: StopReason::Interior,
            hausdorff_gaps: Vec::new(),
            interior: true,
            feasibility,
        });
    }

    let mut ladder: Vec<LadderStep> = Vec::new();
    let mut gaps = Vec::new();
    let mut prev: Option<ActiveSet> = None;
    let mut quiet = 0;
    let mut stop = StopReason::MaxSteps;
    for eps in opts.ladder() {
        let set = snap.active(eps)?;
        let hull = set.hull();
        let gap = match &prev {
            None => None,
            Some(before) => {
                let kept: std::collections::HashSet<&Tag> =
                    set.entries.iter().map(|e| &e.tag).collect();
                let dropped = before.hull().filter(|t, _| !kept.contains(t));
                if dropped.is_empty() {
                    Some(0.0)
                } else {
                    let g = hull_gap(&dropped, &hull, opts.tol_lp, opts.execution)?;
                    if g <= opts.tol_hull {
                        quiet += 1;
                    } else {
                        quiet = 0;
                    }
                    Some(g)
                }
            }
        };
        if let Some(g) = gap {
            gaps.push(g);
        }
        let all_active = set.entries.iter().all(|e| e.value <= opts.tol_feas);
        ladder.push(LadderStep { eps, hull, gap });
        prev = Some(set);
        if all_active {
            stop = StopReason::AllActive;
            break;
        }
        if quiet >= 2 {
            stop = StopReason::Stabilized;
            break;
        }
    }
    let final_set = prev.expect("ladder has at least one step");
    Ok(TCApprox {
        final_hull: ladder.last().expect("nonempty ladder").hull.clone(),
        ladder,
        final_set,
        converged: stop != StopReason::MaxSteps,
        stop,
        hausdorff_gaps: gaps,
        interior: false,
        feasibility,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateKind {
    /// Interior candidate with vanishing objective gradient.
    Unconstrained,
    #[serde(rename = "fj")]
    FJ,
    #[serde(rename = "kkt")]
    KKT,
    /// Rank-deficient equality constraints certify by themselves.
    EqualityDegenerate,
    NoCertificate,
}

impl CertificateKind {
    pub fn is_certified(self) -> bool {
        self != CertificateKind::NoCertificate
    }
}

/// One generator of the final hull with its convex weight.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Weighted {
    /// Position in the hull the certificate was computed from.
    pub index: usize,
    pub tag: Tag,
    pub weight: f64,
    pub generator: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LadderRow {
    pub eps: f64,
    pub generators: usize,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    /// Normalized so that `lambda + beta = 1`.
    pub lambda: f64,
    pub beta: f64,
    /// `beta / lambda`: the constraint multiplier with `λ = 1` (KKT only).
    pub kkt_beta: Option<f64>,
    /// `x* = Σ weightᵢ generatorᵢ`.
    pub witness: Vec<f64>,
    pub coeffs: Vec<Weighted>,
    /// `‖λ∇f(x̂) + βx*‖∞` for certificates; the segment distance otherwise.
    pub residual: f64,
    pub zero_not_in_tc: bool,
    /// Sup-norm distance from 0 to the final hull.
    pub tc_distance: Option<f64>,
    pub objective_gradient: Vec<f64>,
    /// The ladder did not converge; the verdict rests on the last step.
    pub approximate: bool,
    pub stop: StopReason,
    pub ladder: Vec<LadderRow>,
}

impl Certificate {
    /// Recomputes `‖λ∇f + Σ wᵢgᵢ·β‖∞` from the stored data.
    pub fn recompute_residual(&self) -> f64 {
        let mut r = scale(&self.objective_gradient, self.lambda);
        for c in &self.coeffs {
            axpy(&mut r, self.beta * c.weight, &c.generator);
        }
        norm_inf(&r)
    }
}

/// Decides `0 ∈ [grad, conv(hull)]` and packages the multipliers. Ladder
/// metadata is left at neutral values for the caller to fill in.
pub fn decide(grad: &[f64], hull: &Hull, opts: &Options) -> Result<Certificate, CertifyError> {
    let p = grad.len();
    let blank = |kind| Certificate {
        kind,
        lambda: 0.0,
        beta: 0.0,
        kkt_beta: None,
        witness: vec![0.0; p],
        coeffs: Vec::new(),
        residual: 0.0,
        zero_not_in_tc: true,
        tc_distance: None,
        objective_gradient: grad.to_vec(),
        approximate: false,
        stop: StopReason::AllActive,
        ladder: Vec::new(),
    };
    let gnorm = norm_inf(grad);
    let zero = vec![0.0; p];
    let (zero_not_in_tc, tc_distance) = if hull.is_empty() {
        (true, None)
    } else {
        let m = hull_member(&zero, hull, opts.tol)?;
        (!m.member, Some(m.distance))
    };

    if gnorm <= opts.tol {
        // (λ, β) = (1, 0) needs no constraint at all.
        let mut c = blank(if hull.is_empty() {
            CertificateKind::Unconstrained
        } else if zero_not_in_tc {
            CertificateKind::KKT
        } else {
            CertificateKind::FJ
        });
        c.lambda = 1.0;
        c.kkt_beta = (c.kind == CertificateKind::KKT).then_some(0.0);
        c.residual = gnorm;
        c.zero_not_in_tc = zero_not_in_tc;
        c.tc_distance = tc_distance;
        return Ok(c);
    }
    if hull.is_empty() {
        let mut c = blank(CertificateKind::NoCertificate);
        c.residual = gnorm;
        return Ok(c);
    }

    let seg = segment_hull_member(&zero, grad, hull, opts.tol)?;
    if !seg.member {
        let mut c = blank(CertificateKind::NoCertificate);
        c.residual = seg.distance;
        c.zero_not_in_tc = zero_not_in_tc;
        c.tc_distance = tc_distance;
        c.witness = hull.combine(&seg.coeffs);
        return Ok(c);
    }
    // The witness ray may cross the hull along a segment; take its far end
    // (largest λ), which does not depend on the scale of ∇f.
    let scale_ref = hull
        .generators()
        .iter()
        .map(|g| norm_inf(g))
        .fold(gnorm, f64::max);
    let seg = match segment_max_weight(&zero, grad, hull, seg.distance + 1e-12 * scale_ref)? {
        Some(s) if s.distance <= opts.tol => s,
        _ => seg,
    };
    let lambda = seg.lambda;
    let beta = 1.0 - lambda;
    let x_star = hull.combine(&seg.coeffs);

    // A single generator reproducing x* is the sparsest representation.
    let nearest = hull
        .generators()
        .iter()
        .enumerate()
        .map(|(i, g)| (i, norm_inf(&sub(g, &x_star))))
        .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
            Some((_, bd)) if bd <= d => best,
            _ => Some((i, d)),
        })
        .expect("nonempty hull");
    let (indices, weights) = if nearest.1 <= opts.tol_lp {
        (vec![nearest.0], vec![1.0])
    } else {
        caratheodory_reduce(&x_star, hull, &seg.coeffs, opts.tol)?
    };
    let coeffs: Vec<Weighted> = indices
        .iter()
        .zip(&weights)
        .map(|(&i, &w)| Weighted {
            index: i,
            tag: hull.tags()[i].clone(),
            weight: w,
            generator: hull.generators()[i].clone(),
        })
        .collect();
    let mut witness = vec![0.0; p];
    for c in &coeffs {
        axpy(&mut witness, c.weight, &c.generator);
    }
    let residual_at = |l: f64| {
        let mut r = scale(grad, l);
        axpy(&mut r, 1.0 - l, &witness);
        norm_inf(&r)
    };
    let (mut lambda, mut beta) = (lambda, beta);
    let mut residual = residual_at(lambda);
    // With x* fixed, the best λ solves λ∇f ≈ −(1−λ)x* in least squares.
    let ratio = -dot(grad, &witness) / dot(grad, grad);
    if lambda > 0.0 && ratio > 0.0 {
        let l = ratio / (1.0 + ratio);
        let r = residual_at(l);
        if r <= residual {
            (lambda, beta, residual) = (l, 1.0 - l, r);
        }
    }

    let kind = if residual > opts.tol {
        CertificateKind::NoCertificate
    } else if zero_not_in_tc && lambda > 0.0 {
        CertificateKind::KKT
    } else {
        CertificateKind::FJ
    };
    Ok(Certificate {
        kind,
        lambda,
        beta,
        kkt_beta: (kind == CertificateKind::KKT).then(|| beta / lambda),
        witness,
        coeffs,
        residual,
        zero_not_in_tc,
        tc_distance,
        objective_gradient: grad.to_vec(),
        approximate: false,
        stop: StopReason::AllActive,
        ladder: Vec::new(),
    })
}

/// The hull the certificate is decided against: the final ladder hull, or
/// with `strict_active` only its exactly active, declared members.
pub fn certificate_hull(tc: &TCApprox, opts: &Options) -> (Hull, ActiveSet) {
    if opts.strict_active {
        let set = tc
            .final_set
            .filter(|e| e.value <= opts.tol_feas && !e.tag.is_limit());
        (set.hull(), set)
    } else {
        (tc.final_hull.clone(), tc.final_set.clone())
    }
}

pub(crate) fn annotate(cert: &mut Certificate, tc: &TCApprox) {
    cert.approximate = !tc.converged;
    cert.stop = tc.stop;
    cert.ladder = tc
        .ladder
        .iter()
        .map(|s| LadderRow {
            eps: s.eps,
            generators: s.hull.len(),
            gap: s.gap,
        })
        .collect();
}

/// Certificate for `max f` subject to the inequality family at `x`.
pub fn certify_fj(prob: &Problem, x: &[f64], opts: &Options) -> Result<Certificate, CertifyError> {
    certify_with_tc(prob, x, opts).map(|(c, _)| c)
}

/// [`certify_fj`] together with the ladder it was computed from.
pub fn certify_with_tc(
    prob: &Problem,
    x: &[f64],
    opts: &Options,
) -> Result<(Certificate, TCApprox), CertifyError> {
    let tc = tc_approx(prob, x, opts)?;
    let grad = prob.objective_gradient(x, opts)?;
    let mut cert = if tc.interior {
        decide(&grad, &Hull::empty(prob.dim()), opts)?
    } else {
        let (hull, _) = certificate_hull(&tc, opts);
        decide(&grad, &hull, opts)?
    };
    annotate(&mut cert, &tc);
    Ok((cert, tc))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SipTerm {
    pub tag: Tag,
    pub t: Vec<f64>,
    pub weight: f64,
    pub gradient: Vec<f64>,
}

/// `λ₀∇f(x̂) + Σ λᵢ∇ₓh(x̂, tᵢ) = 0` with `Σλ = 1` and at most `p` terms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SipMultipliers {
    pub lambda0: f64,
    pub terms: Vec<SipTerm>,
    pub residual: f64,
    /// `0 ∉ conv{∇ₓh(x̂, t)}` over the final hull, which forces `λ₀ > 0`.
    pub lambda0_nonzero: bool,
    pub certificate: Certificate,
}

/// Semi-infinite recast of the certificate over a parametric family.
pub fn sip_multipliers(
    prob: &Problem,
    x: &[f64],
    opts: &Options,
) -> Result<SipMultipliers, CertifyError> {
    if !matches!(prob.inequality(), Some(ConstraintFamily::Parametric { .. })) {
        return Err(CertifyError::NotParametric);
    }
    let cert = certify_fj(prob, x, opts)?;
    if cert.stop == StopReason::Interior {
        return Err(CertifyError::NoActiveConstraint);
    }
    if !cert.kind.is_certified() {
        return Err(CertifyError::NoCertificate {
            distance: cert.residual,
        });
    }
    let p = prob.dim();
    let grad = &cert.objective_gradient;
    let mut lambda0 = cert.lambda;
    let mut terms: Vec<(Tag, f64, Vec<f64>)> = cert
        .coeffs
        .iter()
        .map(|c| (c.tag.clone(), cert.beta * c.weight, c.generator.clone()))
        .collect();
    if terms.len() > p {
        // Reduce the joint combination of {gᵢ} ∪ {∇f} representing 0; ∇f goes
        // last so ties drop constraint terms first.
        let mut gens: Vec<Vec<f64>> = terms.iter().map(|t| t.2.clone()).collect();
        gens.push(grad.clone());
        let mut weights: Vec<f64> = terms.iter().map(|t| t.1).collect();
        weights.push(lambda0);
        let joint = Hull::new(p, gens)?;
        let (idx, w) = caratheodory_reduce(&vec![0.0; p], &joint, &weights, opts.tol)?;
        let n = terms.len();
        lambda0 = idx.iter().zip(&w).find(|(&i, _)| i == n).map_or(0.0, |(_, &v)| v);
        terms = idx
            .iter()
            .zip(&w)
            .filter(|(&i, _)| i < n)
            .map(|(&i, &v)| (terms[i].0.clone(), v, terms[i].2.clone()))
            .collect();
    }
    let mut r = scale(grad, lambda0);
    for (_, w, g) in &terms {
        axpy(&mut r, *w, g);
    }
    let residual = norm_inf(&r);
    Ok(SipMultipliers {
        lambda0,
        terms: terms
            .into_iter()
            .map(|(tag, weight, gradient)| SipTerm {
                t: tag.parameter().map(<[f64]>::to_vec).unwrap_or_default(),
                tag,
                weight,
                gradient,
            })
            .collect(),
        residual,
        lambda0_nonzero: cert.zero_not_in_tc,
        certificate: cert,
    })
}
