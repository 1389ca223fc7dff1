//! Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use sipcert_core::checks::{self, Case, CheckResult, SuiteSizes};
use sipcert_core::fixtures::*;
use sipcert_core::geometry::{cone_interior_nonempty, Polyhedron};
use sipcert_core::linalg::{dot, norm2, norm_inf, sub};
use sipcert_core::model::{ConstraintFamily, Options};
use sipcert_core::multipliers::{certify_fj, sip_multipliers, tc_approx, CertificateKind};
use sipcert_core::reduction::{
    certify_composed, certify_equality, convex_set_multiplier, Branch,
};

const SEED: u64 = 20_240_601;

struct Outcome {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.failures.push(what.into());
        }
    }

    fn suite(&mut self, r: &CheckResult) {
        self.notes.push(format!("{}: {}/{} ok", r.name, r.instances - r.failures, r.instances));
        self.notes.extend(r.notes.iter().cloned());
        self.check(r.passed(), format!("{} failed: {:?}", r.name, r.notes));
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && norm_inf(&sub(a, b)) <= tol
}

fn exn1_criterion(o: &mut Outcome) -> Result<(), String> {
    let opts = Options::default();
    let prob = exn1();
    let x = [0.0, 0.0];
    let tc = tc_approx(&prob, &x, &opts).map_err(|e| e.to_string())?;
    let gens = tc.final_hull.generators();
    let expected = [[1.0, 0.0], [0.0, 1.0]];
    let same_set = gens.len() == 2
        && expected.iter().all(|e| gens.iter().any(|g| close(g, e, 1e-9)));
    o.check(same_set, format!("final generators {gens:?}"));

    let c = certify_fj(&prob, &x, &opts).map_err(|e| e.to_string())?;
    o.check(c.kind == CertificateKind::KKT, format!("kind {:?}", c.kind));
    o.check(close(&c.witness, &[0.0, 1.0], 1e-9), format!("witness {:?}", c.witness));
    o.check(
        (c.lambda - 0.5).abs() <= 1e-9 && (c.beta - 0.5).abs() <= 1e-9,
        format!("(λ, β) = ({}, {})", c.lambda, c.beta),
    );

    let strict = Options {
        strict_active: true,
        ..Options::default()
    };
    let s = certify_fj(&prob, &x, &strict).map_err(|e| e.to_string())?;
    o.check(s.kind == CertificateKind::NoCertificate, format!("strict variant {:?}", s.kind));
    o.notes.push(format!("ladder stop {:?} after {} steps", tc.stop, tc.ladder.len()));
    Ok(())
}

/// Euclidean distance from `v` to the segment `[a, b]`.
fn segment_distance(v: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let d = sub(b, a);
    let t = (dot(&sub(v, a), &d) / dot(&d, &d)).clamp(0.0, 1.0);
    let p: Vec<f64> = a.iter().zip(&d).map(|(ai, di)| ai + t * di).collect();
    norm2(&sub(v, &p))
}

fn sip_criterion(o: &mut Outcome) -> Result<(), String> {
    let opts = Options::default();
    let prob = linear_sip(1025);
    let x = [1.0, 1.0];
    let tc = tc_approx(&prob, &x, &opts).map_err(|e| e.to_string())?;
    let gap = tc
        .final_hull
        .generators()
        .iter()
        .map(|g| segment_distance(g, &[-1.0, 0.0], &[0.0, -1.0]))
        .fold(0.0, f64::max);
    o.check(gap <= 1e-6, format!("one-sided Hausdorff distance {gap:e}"));

    let s = sip_multipliers(&prob, &x, &opts).map_err(|e| e.to_string())?;
    o.check(s.terms.len() == 1, format!("{} terms", s.terms.len()));
    o.check((s.lambda0 - 1.0 / 3.0).abs() <= 1e-6, format!("λ₀ = {}", s.lambda0));
    if let Some(t) = s.terms.first() {
        o.check((t.weight - 2.0 / 3.0).abs() <= 1e-6, format!("λ₁ = {}", t.weight));
        o.check(close(&t.t, &[0.5], 1e-6), format!("t₁ = {:?}", t.t));
    }
    o.check(s.residual <= 1e-9, format!("residual {:e}", s.residual));
    o.notes.push(format!("{} final generators, stop {:?}", tc.final_hull.len(), tc.stop));
    Ok(())
}

fn equality_criterion(o: &mut Outcome) -> Result<(), String> {
    let opts = Options::default();
    let c = certify_equality(&circle(), &[1.0, 0.0], &opts).map_err(|e| e.to_string())?;
    o.check(c.branch == Branch::OntoNoA, format!("circle branch {:?}", c.branch));
    o.check(c.lambda0 == 1.0, format!("λ₀ = {}", c.lambda0));
    o.check(close(&c.w0, &[-0.5], 1e-9), format!("w₀ = {:?}", c.w0));
    o.check(c.residual <= 1e-9, format!("circle residual {:e}", c.residual));
    o.check(c.kind.is_certified(), format!("circle kind {:?}", c.kind));

    let d = certify_equality(&duplicated_rows(), &[0.0, 0.0], &opts).map_err(|e| e.to_string())?;
    o.check(d.branch == Branch::NotOnto, format!("duplicated branch {:?}", d.branch));
    let v = d.jacobian.left_null.clone().unwrap_or_default();
    o.check((norm2(&v) - 1.0).abs() <= 1e-9, format!("left null {v:?}"));
    // vᵀJ = 0: v is orthogonal to every column of J.
    let orth = norm_inf(&d.jacobian.tr_mul(&v));
    o.check(!v.is_empty() && orth <= 1e-9, format!("left null not orthogonal: {orth:e}"));
    Ok(())
}

fn convex_set_criterion(o: &mut Outcome) -> Result<(), String> {
    let opts = Options::default();
    let cases = [
        ("composed orthant", composed_orthant(), vec![0.0, 0.0]),
        ("kernel orthant", kernel_orthant(), vec![0.0, 0.0]),
        ("half-plane", halfplane(), vec![0.5, 0.5]),
    ];
    let mut emitted = 0;
    for (name, prob, x) in cases {
        let Some(ConstraintFamily::Polyhedral(a)) = prob.inequality() else {
            return Err(format!("{name} is not polyhedral"));
        };
        let image = match prob.inner_map() {
            Some(g) => g.iter().map(|gi| gi.eval(&x, &[]).unwrap()).collect(),
            None => x.clone(),
        };
        let mut zs = Vec::new();
        let full = certify_equality(&prob, &x, &opts).map_err(|e| e.to_string())?;
        o.check(full.kind.is_certified(), format!("{name}: {:?}", full.kind));
        zs.extend(full.z0.clone());
        if prob.equality().is_none() {
            let c = certify_composed(&prob, &x, &opts).map_err(|e| e.to_string())?;
            if let Some(y) = &c.y_star {
                zs.push(y.iter().map(|v| c.certificate.beta * v).collect());
            }
        }
        for z in zs {
            emitted += 1;
            let r = convex_set_multiplier(a, &image, &z, 1e-8).map_err(|e| e.to_string())?;
            o.check(r.pass, format!("{name}: z₀ = {z:?} fails ({r:?})"));
        }
    }
    o.check(emitted >= 4, format!("only {emitted} multipliers emitted"));
    o.notes.push(format!("{emitted} multipliers checked"));
    Ok(())
}

fn fixture_cases() -> Vec<(&'static str, Case)> {
    let case = |problem, candidate: &[f64]| Case {
        problem,
        candidate: candidate.to_vec(),
    };
    vec![
        ("ExN1", case(exn1(), &[0.0, 0.0])),
        ("linear SIP", case(linear_sip(1025), &[1.0, 1.0])),
        ("trigonometric SIP", case(trig_sip(257), &TRIG_CANDIDATE)),
        ("composed orthant", case(composed_orthant(), &[0.0, 0.0])),
        ("kernel orthant", case(kernel_orthant(), &[0.0, 0.0])),
        ("half-plane", case(halfplane(), &[0.5, 0.5])),
        ("rotated composition", case(rotated_composition(), &[0.0, 0.0])),
    ]
}

fn property_criterion(o: &mut Outcome) -> Result<(), String> {
    let opts = Options::default();
    let sizes = SuiteSizes::full();
    o.suite(&checks::gradients_vs_differences(sizes.gradients, SEED));
    o.suite(&checks::hull_vs_grid(sizes.hulls, SEED));

    for (name, c) in fixture_cases() {
        let r = tc_approx(&c.problem, &c.candidate, &opts)
            .map_err(|e| e.to_string())
            .and_then(|tc| checks::ladder_is_nested(&tc, opts.tol));
        o.check(r.is_ok(), format!("ladder nesting on {name}: {r:?}"));
    }
    o.suite(&checks::ladder_nesting_random(sizes.ladders, SEED, &opts));
    o.suite(&checks::caratheodory_support(sizes.caratheodory, SEED));

    let mut cases: Vec<Case> = fixture_cases()
        .into_iter()
        .filter(|(_, c)| c.problem.equality().is_none())
        .map(|(_, c)| c)
        .collect();
    cases.extend(checks::random_cases(20, SEED, true));
    o.suite(&checks::scaling_invariance(&cases, &opts));
    o.suite(&checks::finite_family_oracle(sizes.finite_oracle, SEED, &opts));
    o.suite(&checks::composition_vs_differences(sizes.compositions, SEED));
    Ok(())
}

fn cone_criterion(o: &mut Outcome) -> Result<(), String> {
    let sizes = SuiteSizes::full();
    o.suite(&checks::cone_interior_vs_sampling(sizes.cones, sizes.cone_directions, SEED));
    let orthant = cone_interior_nonempty(&orthant(3), 1e-8).map_err(|e| e.to_string())?;
    o.check(orthant.nonempty, "orthant interior reported empty");
    let plane = cone_interior_nonempty(&hyperplane_cone(), 1e-8).map_err(|e| e.to_string())?;
    o.check(!plane.nonempty, "hyperplane interior reported nonempty");
    let whole = cone_interior_nonempty(&Polyhedron::full(3), 1e-8).map_err(|e| e.to_string())?;
    o.check(whole.nonempty, "whole space interior reported empty");
    Ok(())
}

fn main() -> ExitCode {
    let criteria: [(&str, fn(&mut Outcome) -> Result<(), String>, Option<Duration>); 6] = [
        ("1 counterexample ExN1", exn1_criterion, Some(Duration::from_millis(100))),
        ("2 SIP closed form", sip_criterion, Some(Duration::from_secs(1))),
        ("3 equality branches", equality_criterion, None),
        ("4 convex-set multipliers", convex_set_criterion, None),
        ("5 property suites", property_criterion, Some(Duration::from_secs(30))),
        ("6 cone interior", cone_criterion, None),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let mut o = Outcome::new();
        let start = Instant::now();
        if let Err(e) = run(&mut o) {
            o.failures.push(format!("error: {e}"));
        }
        let took = start.elapsed();
        if let Some(b) = budget {
            o.check(took <= b, format!("took {took:?}, budget {b:?}"));
        }
        let verdict = if o.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("{verdict} criterion {name} ({:.3} s)", took.as_secs_f64());
        for n in &o.notes {
            println!("      {n}");
        }
        for f in &o.failures {
            println!("    ! {f}");
        }
        failed += !o.failures.is_empty() as usize;
    }
    println!("{} of 6 criteria passed", 6 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
