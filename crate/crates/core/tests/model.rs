use proptest::prelude::*;
use sipcert_core::fixtures::*;
use sipcert_core::model::{
    active_set, admissible_diagnostics, equi_lipschitz_estimate, feasibility, Admissibility,
    ConstraintFamily, ModelError, Options, Problem,
};
use sipcert_core::Tag;

fn tags(prob: &Problem, x: &[f64], eps: f64) -> Vec<Tag> {
    active_set(prob, x, eps, &Options::default()).unwrap().tags()
}

#[test]
fn exn1_feasibility() {
    let opts = Options::default();
    let f = feasibility(&exn1(), &[0.0, 0.0], &opts).unwrap();
    assert!(f.feasible && f.boundary);
    assert_eq!(f.infimum, Some(0.0));
    assert_eq!(f.argmin, Some(Tag::Constraint(0)));

    let f = feasibility(&exn1(), &[1.0, 1.0], &opts).unwrap();
    assert!(f.feasible && !f.boundary);
    assert_eq!(f.infimum, Some(1.0));

    let f = feasibility(&exn1(), &[-1.0, 0.0], &opts).unwrap();
    assert!(!f.feasible);
    assert_eq!(f.violated, vec![(Tag::Constraint(0), -1.0)]);
}

#[test]
fn exn1_active_sets() {
    // φ_k(0,0) = 1/k > 0.05 for every k ≤ 10; only φ₀ and the limit member
    // (value 0) are near-active.
    let small = tags(&exn1(), &[0.0, 0.0], 0.05);
    assert_eq!(
        small,
        vec![Tag::Constraint(0), Tag::SequenceLimit { member: 1 }]
    );
    let large = tags(&exn1(), &[0.0, 0.0], 0.5);
    assert_eq!(large.len(), 2 + 9);
    for k in 2..=10 {
        assert!(large.contains(&Tag::Sequence { member: 1, k }));
    }
    assert!(!large.contains(&Tag::Sequence { member: 1, k: 1 }));
}

#[test]
fn truncation_follows_k_max() {
    let opts = Options {
        k_max: 40,
        ..Options::default()
    };
    let set = active_set(&exn1(), &[0.0, 0.0], 0.05, &opts).unwrap();
    // 1/k ≤ 0.05 for k = 20..=40
    assert_eq!(set.len(), 2 + 21);
    for e in &set.entries {
        assert_eq!(e.gradient, if e.tag == Tag::Constraint(0) { vec![1.0, 0.0] } else { vec![0.0, 1.0] });
    }
}

#[test]
fn linear_sip_every_grid_point_is_active() {
    let set = active_set(&linear_sip(65), &[1.0, 1.0], 1e-6, &Options::default()).unwrap();
    let grid = set.tags().iter().filter(|t| matches!(t, Tag::Parameter(_))).count();
    assert_eq!(grid, 65);
    assert!(set.entries.iter().all(|e| e.value == 0.0));
}

#[test]
fn infeasible_point_has_no_active_set() {
    let err = active_set(&exn1(), &[-1.0, 0.0], 0.1, &Options::default()).unwrap_err();
    assert!(matches!(err, ModelError::Infeasible { .. }));
}

#[test]
fn refinement_is_stable_under_grid_doubling() {
    let opts = Options::default();
    let params = |grid: usize, refined_only: bool| -> Vec<f64> {
        active_set(&trig_sip(grid), &TRIG_CANDIDATE, 1e-6, &opts)
            .unwrap()
            .tags()
            .iter()
            .filter_map(|t| match t {
                Tag::Refined(t) => Some(t[0]),
                Tag::Parameter(t) if !refined_only => Some(t[0]),
                _ => None,
            })
            .collect()
    };
    let coarse_cell = 1.5 / 64.0;
    let mut base = 65;
    while base <= 1025 {
        let a = params(base, true);
        let b = params(2 * base - 1, false);
        assert!(!a.is_empty());
        for t in &a {
            assert!(b.iter().any(|s| (s - t).abs() <= coarse_cell), "{a:?} vs {b:?}");
        }
        base = 2 * base - 1;
    }
}

#[test]
fn lipschitz_estimates() {
    let opts = Options::default();
    // In one dimension every pair attains the modulus of a linear member.
    let one = finite("0", &["x1"], 1);
    let r = equi_lipschitz_estimate(&one, &[0.0], 0.1, 64, 1, &opts).unwrap();
    assert!((r - 1.0).abs() < 1e-9);
    let ten = finite("0", &["10*x1"], 2);
    let r = equi_lipschitz_estimate(&ten, &[0.0, 0.0], 0.1, 256, 1, &opts).unwrap();
    assert!(r <= 10.0 + 1e-9 && r > 9.0);
    let r = equi_lipschitz_estimate(&exn1(), &[0.0, 0.0], 0.1, 256, 1, &opts).unwrap();
    assert!(r <= 1.0 + 1e-9 && r > 0.9);
    assert!(equi_lipschitz_estimate(&exn1(), &[0.0, 0.0], 0.0, 8, 1, &opts).is_err());
}

#[test]
fn lipschitz_is_monotone_in_samples() {
    let opts = Options::default();
    let p = finite("0", &["x1^2 + sin(3*x2)", "exp(x1) - x2"], 2);
    let mut last = 0.0;
    for n in [1, 4, 16, 64, 256] {
        let r = equi_lipschitz_estimate(&p, &[0.2, -0.1], 0.5, n, 99, &opts).unwrap();
        assert!(r >= last);
        last = r;
    }
}

#[test]
fn admissibility_reports() {
    let opts = Options::default();
    let r = admissible_diagnostics(&exn1(), &[0.0, 0.0], 0.05, 1, &opts).unwrap();
    assert_eq!(r.status, Admissibility::Admissible);
    let d = r.hull_distance.unwrap();
    assert!((d - 0.5).abs() < 1e-9, "{d}");

    let sym = finite("0", &["x1", "-x1"], 1);
    let r = admissible_diagnostics(&sym, &[0.0], 0.05, 1, &opts).unwrap();
    assert_eq!(r.status, Admissibility::WeakAdmissible);

    let orth = Problem::new(
        2,
        expr("0", 2),
        Some(ConstraintFamily::Polyhedral(orthant(2))),
        None,
        None,
    )
    .unwrap();
    let r = admissible_diagnostics(&orth, &[0.0, 0.0], 0.05, 1, &opts).unwrap();
    assert_eq!(r.status, Admissibility::Admissible);
    let det = r.determination.unwrap();
    assert_eq!(det[0].unit_normal, vec![1.0, 0.0]);
    assert_eq!(det[1].unit_normal, vec![0.0, 1.0]);
    assert!(det.iter().all(|d| d.infimum == Some(0.0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn active_sets_are_monotone(a in 1e-9f64..1.0, b in 1e-9f64..1.0, which in 0usize..3) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (p, x) = match which {
            0 => (exn1(), vec![0.0, 0.0]),
            1 => (trig_sip(129), TRIG_CANDIDATE.to_vec()),
            _ => (finite("x1", &["x1 + 1e-4", "x2 + 0.3", "x1 + x2"], 2), vec![0.0, 0.0]),
        };
        let small = tags(&p, &x, lo);
        let large = tags(&p, &x, hi);
        prop_assert!(small.iter().all(|t| large.contains(t)));
    }
}
