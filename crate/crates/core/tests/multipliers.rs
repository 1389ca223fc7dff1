use sipcert_core::checks::{ladder_is_nested, scaled_objective, SCALES};
use sipcert_core::fixtures::*;
use sipcert_core::linalg::norm_inf;
use sipcert_core::model::{ModelError, Options};
use sipcert_core::multipliers::{
    certify_fj, sip_multipliers, tc_approx, CertificateKind, CertifyError, StopReason,
};
use sipcert_core::{Execution, Tag};

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

#[test]
fn exn1_hull_is_driven_by_the_limit_gradient() {
    let tc = tc_approx(&exn1(), &[0.0, 0.0], &Options::default()).unwrap();
    assert!(tc.converged);
    let gens = tc.final_hull.generators();
    assert_eq!(gens.len(), 2);
    assert!(gens.iter().any(|g| close(g, &[1.0, 0.0], 1e-12)));
    assert!(gens.iter().any(|g| close(g, &[0.0, 1.0], 1e-12)));
    assert!(tc.final_hull.tags().contains(&Tag::Constraint(0)));
}

#[test]
fn exn1_kkt_certificate() {
    let c = certify_fj(&exn1(), &[0.0, 0.0], &Options::default()).unwrap();
    assert_eq!(c.kind, CertificateKind::KKT);
    assert!(close(&c.witness, &[0.0, 1.0], 1e-12));
    assert!((c.lambda - 0.5).abs() < 1e-12 && (c.beta - 0.5).abs() < 1e-12);
    assert_eq!(c.kkt_beta, Some(1.0));
    assert!(c.zero_not_in_tc);
    assert_eq!(c.coeffs.len(), 1);
    assert!(c.residual <= 1e-12);
    assert_eq!(c.residual, c.recompute_residual());
}

#[test]
fn strictly_active_hull_is_not_enough() {
    let opts = Options {
        strict_active: true,
        ..Options::default()
    };
    let c = certify_fj(&exn1(), &[0.0, 0.0], &opts).unwrap();
    assert_eq!(c.kind, CertificateKind::NoCertificate);
    assert!(c.residual > opts.tol);
}

#[test]
fn interior_candidate_has_empty_tc() {
    let tc = tc_approx(&exn1(), &[1.0, 1.0], &Options::default()).unwrap();
    assert!(tc.interior);
    assert_eq!(tc.stop, StopReason::Interior);
    assert!(tc.final_hull.is_empty());
    // ∇f(1, 1) = (−2, −1) ≠ 0 with nothing to balance it.
    let c = certify_fj(&exn1(), &[1.0, 1.0], &Options::default()).unwrap();
    assert_eq!(c.kind, CertificateKind::NoCertificate);
}

#[test]
fn unconstrained_stationary_point() {
    let p = finite("-(x1 - 1)^2 - x2^2", &["2 - x1"], 2);
    let c = certify_fj(&p, &[1.0, 0.0], &Options::default()).unwrap();
    assert_eq!(c.kind, CertificateKind::Unconstrained);
    assert_eq!((c.lambda, c.beta), (1.0, 0.0));
}

#[test]
fn infeasible_candidate_is_rejected() {
    let err = certify_fj(&exn1(), &[-1.0, 0.0], &Options::default()).unwrap_err();
    match err {
        CertifyError::Model(ModelError::Infeasible { tag, value }) => {
            assert_eq!(tag, Tag::Constraint(0).to_string());
            assert_eq!(value, -1.0);
        }
        e => panic!("unexpected {e:?}"),
    }
}

#[test]
fn fritz_john_without_qualification() {
    // x2 ≥ x1² and −x2 ≥ 0 meet only at the origin; 0 ∈ T_C.
    let p = finite("x1", &["x2 - x1^2", "-x2"], 2);
    let c = certify_fj(&p, &[0.0, 0.0], &Options::default()).unwrap();
    assert_eq!(c.kind, CertificateKind::FJ);
    assert!(!c.zero_not_in_tc);
}

#[test]
fn linear_sip_closed_form() {
    let opts = Options::default();
    let prob = linear_sip(1025);
    let tc = tc_approx(&prob, &[1.0, 1.0], &opts).unwrap();
    let gens = tc.final_hull.generators();
    assert!(gens.iter().any(|g| close(g, &[-1.0, 0.0], 1e-15)));
    assert!(gens.iter().any(|g| close(g, &[0.0, -1.0], 1e-15)));

    let s = sip_multipliers(&prob, &[1.0, 1.0], &opts).unwrap();
    assert!((s.lambda0 - 1.0 / 3.0).abs() < 1e-9);
    assert_eq!(s.terms.len(), 1);
    assert!((s.terms[0].weight - 2.0 / 3.0).abs() < 1e-9);
    assert!(close(&s.terms[0].t, &[0.5], 1e-12));
    assert!(s.residual <= 1e-9);
    assert!(s.lambda0_nonzero);
}

#[test]
fn sip_needs_a_parametric_family() {
    let err = sip_multipliers(&exn1(), &[0.0, 0.0], &Options::default()).unwrap_err();
    assert!(matches!(err, CertifyError::NotParametric));
}

#[test]
fn trigonometric_sip_refines_to_the_active_index() {
    let opts = Options::default();
    let tc = tc_approx(&trig_sip(257), &TRIG_CANDIDATE, &opts).unwrap();
    assert_eq!(tc.stop, StopReason::AllActive);
    let t_star = 0.8f64.atan2(0.6);
    let tags = tc.final_hull.tags();
    assert_eq!(tags.len(), 1);
    assert!(matches!(&tags[0], Tag::Refined(t) if (t[0] - t_star).abs() < 1e-9));
    // Closed form: the hull is the single gradient −(cos t*, sin t*).
    assert!(close(&tc.final_hull.generators()[0], &[-0.6, -0.8], 1e-6));

    let s = sip_multipliers(&trig_sip(257), &TRIG_CANDIDATE, &opts).unwrap();
    assert_eq!(s.certificate.kind, CertificateKind::KKT);
    assert!((s.lambda0 - 0.5).abs() < 1e-9);
    assert!(s.residual <= 1e-9);
}

#[test]
fn fine_grid_ladder_is_flagged_approximate() {
    // A grid point sits 1.2e-9 above zero: above tol_feas, below every ε the
    // default ladder reaches.
    let opts = Options::default();
    let c = certify_fj(&trig_sip(1025), &TRIG_CANDIDATE, &opts).unwrap();
    assert_eq!(c.stop, StopReason::MaxSteps);
    assert!(c.approximate);
    assert_eq!(c.kind, CertificateKind::KKT);
    assert!(close(&c.witness, &[-0.6, -0.8], 1e-9));
}

#[test]
fn ladders_are_nested_on_fixtures() {
    let opts = Options::default();
    let cases: [(sipcert_core::model::Problem, Vec<f64>); 5] = [
        (exn1(), vec![0.0, 0.0]),
        (linear_sip(129), vec![1.0, 1.0]),
        (trig_sip(1025), TRIG_CANDIDATE.to_vec()),
        (composed_orthant(), vec![0.0, 0.0]),
        (finite("x1", &["x1 + 1e-3", "x2 + 1e-6", "-x1 - x2"], 2), vec![0.0, 0.0]),
    ];
    for (p, x) in &cases {
        let tc = tc_approx(p, x, &opts).unwrap();
        ladder_is_nested(&tc, opts.tol).unwrap();
        let eps: Vec<f64> = tc.ladder.iter().map(|s| s.eps).collect();
        assert!(eps.windows(2).all(|w| w[1] < w[0]));
    }
}

#[test]
fn ladder_drops_members_as_eps_shrinks() {
    let p = finite("-x1 - x2", &["x1", "x2 + 1e-3", "x1 + x2 + 1e-6"], 2);
    let tc = tc_approx(&p, &[0.0, 0.0], &Options::default()).unwrap();
    let sizes: Vec<usize> = tc.ladder.iter().map(|s| s.hull.len()).collect();
    assert_eq!(sizes[0], 3);
    assert_eq!(*sizes.last().unwrap(), 1);
    assert!(tc.converged);
}

#[test]
fn objective_scaling_keeps_verdict_and_witness() {
    let opts = Options::default();
    for (p, x) in [(exn1(), vec![0.0, 0.0]), (trig_sip(257), TRIG_CANDIDATE.to_vec())] {
        let base = certify_fj(&p, &x, &opts).unwrap();
        for c in SCALES {
            let s = certify_fj(&scaled_objective(&p, c), &x, &opts).unwrap();
            assert_eq!(s.kind, base.kind);
            assert!(close(&s.witness, &base.witness, 1e-8));
            // λ∇f + βx* = 0 fixes λ/β = |x*| / (c |∇f|) along the ray.
            let ratio = s.lambda / s.beta * c;
            assert!((ratio - base.lambda / base.beta).abs() < 1e-8 * ratio.max(1.0));
        }
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let par = Options::default();
    let seq = Options {
        execution: Execution::Sequential,
        ..Options::default()
    };
    for (p, x) in [(linear_sip(1025), vec![1.0, 1.0]), (trig_sip(257), TRIG_CANDIDATE.to_vec())] {
        let a = tc_approx(&p, &x, &par).unwrap();
        let b = tc_approx(&p, &x, &seq).unwrap();
        assert_eq!(a.final_hull, b.final_hull);
        assert_eq!(a.hausdorff_gaps, b.hausdorff_gaps);
        assert_eq!(certify_fj(&p, &x, &par).unwrap(), certify_fj(&p, &x, &seq).unwrap());
    }
}

#[test]
fn certificate_residual_is_recomputable() {
    let opts = Options::default();
    for (p, x) in [
        (exn1(), vec![0.0, 0.0]),
        (halfplane(), vec![0.5, 0.5]),
        (composed_orthant(), vec![0.0, 0.0]),
    ] {
        let c = certify_fj(&p, &x, &opts).unwrap();
        assert!(c.kind.is_certified());
        assert_eq!(c.residual, c.recompute_residual());
        assert!(c.residual <= opts.tol);
        let mut r = c.objective_gradient.iter().map(|g| c.lambda * g).collect::<Vec<_>>();
        for w in &c.coeffs {
            for (ri, gi) in r.iter_mut().zip(&w.generator) {
                *ri += c.beta * w.weight * gi;
            }
        }
        assert!(norm_inf(&r) <= opts.tol);
    }
}
