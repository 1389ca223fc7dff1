//! Bundled fixtures with their expected verdicts, plus the randomized
//! property suites at reduced sizes.

use std::fmt::Write as _;

use serde_json::{json, Value};
use sipcert_core::checks::{run_all, SuiteSizes};

use crate::commands::{admissible, certify, tcset, Timer};
use crate::file::{FileOptions, ProblemFile};
use crate::{CliError, Report, Verdict};

/// Fixture files, by name.
pub const FIXTURES: &[(&str, &str)] = &[
    ("exn1", include_str!("../fixtures/exn1.json")),
    ("exn1_strict", include_str!("../fixtures/exn1_strict.json")),
    ("linear_sip", include_str!("../fixtures/linear_sip.json")),
    ("trig_sip", include_str!("../fixtures/trig_sip.json")),
    ("circle", include_str!("../fixtures/circle.json")),
    ("duplicated_rows", include_str!("../fixtures/duplicated_rows.json")),
    ("composed_orthant", include_str!("../fixtures/composed_orthant.json")),
    ("kernel_orthant", include_str!("../fixtures/kernel_orthant.json")),
    ("halfplane", include_str!("../fixtures/halfplane.json")),
    ("orthant_cone", include_str!("../fixtures/orthant_cone.json")),
    ("hyperplane_cone", include_str!("../fixtures/hyperplane_cone.json")),
    ("fritz_john", include_str!("../fixtures/fritz_john.json")),
];

pub fn fixture(name: &str) -> ProblemFile {
    let (_, src) = FIXTURES
        .iter()
        .find(|(n, _)| *n == name)
        .unwrap_or_else(|| panic!("no fixture {name}"));
    ProblemFile::parse(src).expect("bundled fixtures are valid")
}

#[derive(Clone, Copy)]
enum Cmd {
    Certify,
    Tcset,
    Admissible,
}

type Check = fn(&Value) -> Result<(), String>;

struct Case {
    name: &'static str,
    fixture: &'static str,
    candidate: Option<[f64; 2]>,
    cmd: Cmd,
    expect: &'static [Verdict],
    check: Option<Check>,
}

const CERTIFIED: &[Verdict] = &[Verdict::Fj, Verdict::Kkt];

fn vector(v: &Value) -> Vec<f64> {
    v.as_array()
        .map(|a| a.iter().map(|x| x.as_f64().unwrap_or(f64::NAN)).collect())
        .unwrap_or_default()
}

fn near(v: &Value, want: &[f64], tol: f64, what: &str) -> Result<(), String> {
    let got = vector(v);
    let ok = got.len() == want.len() && got.iter().zip(want).all(|(a, b)| (a - b).abs() <= tol);
    ok.then_some(()).ok_or_else(|| format!("{what} = {got:?}, expected {want:?} within {tol:e}"))
}

fn scalar(v: &Value, want: f64, tol: f64, what: &str) -> Result<(), String> {
    near(&json!([v]), &[want], tol, what)
}

fn generators_include(v: &Value, want: &[&[f64]], exact_count: bool) -> Result<(), String> {
    let gens: Vec<Vec<f64>> = v["final_hull"]["generators"]
        .as_array()
        .map(|a| a.iter().map(vector).collect())
        .unwrap_or_default();
    for w in want {
        if !gens.iter().any(|g| g.len() == w.len() && g.iter().zip(*w).all(|(a, b)| (a - b).abs() <= 1e-9)) {
            return Err(format!("generator {w:?} missing from {gens:?}"));
        }
    }
    if exact_count && gens.len() != want.len() {
        return Err(format!("expected {} generators, got {}", want.len(), gens.len()));
    }
    Ok(())
}

fn convex_pass(v: &Value) -> Result<(), String> {
    match v["convex_set"]["report"]["pass"].as_bool() {
        Some(true) => Ok(()),
        _ => Err(format!("convex-set check failed: {}", v["convex_set"])),
    }
}

fn cases() -> Vec<Case> {
    vec![
        Case {
            name: "exn1 certify",
            fixture: "exn1",
            candidate: None,
            cmd: Cmd::Certify,
            expect: &[Verdict::Kkt],
            check: Some(|v| {
                near(&v["certificate"]["witness"], &[0.0, 1.0], 1e-9, "witness")?;
                scalar(&v["certificate"]["lambda"], 0.5, 1e-9, "lambda")?;
                scalar(&v["certificate"]["beta"], 0.5, 1e-9, "beta")
            }),
        },
        Case {
            name: "exn1 tcset",
            fixture: "exn1",
            candidate: None,
            cmd: Cmd::Tcset,
            expect: &[Verdict::Computed],
            check: Some(|v| generators_include(v, &[&[1.0, 0.0], &[0.0, 1.0]], true)),
        },
        Case {
            name: "exn1 interior candidate",
            fixture: "exn1",
            candidate: Some([1.0, 1.0]),
            cmd: Cmd::Tcset,
            expect: &[Verdict::Computed],
            check: Some(|v| match v["interior"].as_bool() {
                Some(true) => generators_include(v, &[], true),
                _ => Err("candidate not reported interior".into()),
            }),
        },
        Case {
            name: "exn1 infeasible candidate",
            fixture: "exn1",
            candidate: Some([-1.0, 0.0]),
            cmd: Cmd::Certify,
            expect: &[Verdict::Infeasible],
            check: None,
        },
        Case {
            name: "exn1 admissible",
            fixture: "exn1",
            candidate: None,
            cmd: Cmd::Admissible,
            expect: &[Verdict::Admissible],
            check: None,
        },
        Case {
            name: "exn1 strictly active hull",
            fixture: "exn1_strict",
            candidate: None,
            cmd: Cmd::Certify,
            expect: &[Verdict::NoCertificate],
            check: None,
        },
        Case {
            name: "linear SIP certify",
            fixture: "linear_sip",
            candidate: None,
            cmd: Cmd::Certify,
            expect: &[Verdict::Kkt],
            check: Some(|v| {
                let sip = &v["sip"];
                scalar(&sip["lambda0"], 1.0 / 3.0, 1e-6, "lambda0")?;
                let terms = sip["terms"].as_array().map_or(0, Vec::len);
                if terms != 1 {
                    return Err(format!("expected 1 index term, got {terms}"));
                }
                scalar(&sip["terms"][0]["weight"], 2.0 / 3.0, 1e-6, "weight")?;
                near(&sip["terms"][0]["t"], &[0.5], 1e-6, "t")?;
                match sip["residual"].as_f64() {
                    Some(r) if r <= 1e-9 => Ok(()),
                    r => Err(format!("residual {r:?}")),
                }
            }),
        },
        Case {
            name: "linear SIP tcset",
            fixture: "linear_sip",
            candidate: None,
            cmd: Cmd::Tcset,
            expect: &[Verdict::Computed],
            check: Some(|v| generators_include(v, &[&[-1.0, 0.0], &[0.0, -1.0]], false)),
        },
        Case {
            name: "trigonometric SIP certify",
            fixture: "trig_sip",
            candidate: None,
            cmd: Cmd::Certify,
            expect: &[Verdict::Kkt],
            check: Some(|v| {
                near(&v["certificate"]["witness"], &[-0.6, -0.8], 1e-6, "witness")?;
                scalar(&v["sip"]["lambda0"], 0.5, 1e-6, "lambda0")
            }),
        },
        Case {
            name: "circle equality",
            fixture: "circle",
            candidate: None,
            cmd: Cmd::Certify,
            expect: &[Verdict::Kkt],
            check: Some(|v| {
                let c = &v["certificate"];
                if c["branch"] != "onto_no_a" {
                    return Err(format!("branch {}", c["branch"]));
                }
                scalar(&c["lambda0"], 1.0, 1e-9, "lambda0")?;
                near(&c["w0"], &[-0.5], 1e-9, "w0")
            }),
        },
        Case {
            name: "duplicated equality rows",
            fixture: "duplicated_rows",
            candidate: None,
            cmd: Cmd::Certify,
            expect: &[Verdict::EqualityDegenerate],
            check: Some(|v| match v["certificate"]["branch"].as_str() {
                Some("not_onto") => Ok(()),
                b => Err(format!("branch {b:?}")),
            }),
        },
        Case {
            name: "composed orthant",
            fixture: "composed_orthant",
            candidate: None,
            cmd: Cmd::Certify,
            expect: CERTIFIED,
            check: Some(|v| {
                near(&v["y_star"], &[0.0, 1.0], 1e-9, "y*")?;
                convex_pass(v)
            }),
        },
        Case {
            name: "kernel orthant",
            fixture: "kernel_orthant",
            candidate: None,
            cmd: Cmd::Certify,
            expect: CERTIFIED,
            check: Some(convex_pass),
        },
        Case {
            name: "halfplane",
            fixture: "halfplane",
            candidate: None,
            cmd: Cmd::Certify,
            expect: CERTIFIED,
            check: Some(convex_pass),
        },
        Case {
            name: "orthant cone",
            fixture: "orthant_cone",
            candidate: None,
            cmd: Cmd::Admissible,
            expect: &[Verdict::Admissible],
            check: Some(|v| match v["cone"]["interior"]["nonempty"].as_bool() {
                Some(true) => Ok(()),
                _ => Err("orthant interior reported empty".into()),
            }),
        },
        Case {
            name: "hyperplane cone",
            fixture: "hyperplane_cone",
            candidate: None,
            cmd: Cmd::Admissible,
            expect: &[Verdict::WeakAdmissible],
            check: Some(|v| match v["cone"]["interior"]["nonempty"].as_bool() {
                Some(false) => Ok(()),
                _ => Err("hyperplane interior reported nonempty".into()),
            }),
        },
        Case {
            name: "Fritz John without qualification",
            fixture: "fritz_john",
            candidate: None,
            cmd: Cmd::Certify,
            expect: &[Verdict::Fj],
            check: None,
        },
    ]
}

fn run_case(case: &Case, flags: &FileOptions, timer: &mut Timer) -> Result<(), String> {
    let mut file = fixture(case.fixture);
    if let Some(x) = case.candidate {
        file.candidate = Some(x.to_vec());
    }
    let outcome = match case.cmd {
        Cmd::Certify => certify(&file, flags, None, timer),
        Cmd::Tcset => tcset(&file, flags, None, timer),
        Cmd::Admissible => admissible(&file, flags, None, timer),
    };
    let report = outcome.map(|(r, _)| r).unwrap_or_else(|e| Report::from_error("selftest", &e));
    if !case.expect.contains(&report.verdict) {
        let why = report.error.map(|e| format!(": {e}")).unwrap_or_default();
        return Err(format!("verdict {:?}, expected {:?}{why}", report.verdict, case.expect));
    }
    case.check.map_or(Ok(()), |check| check(&report.result))
}

pub fn run(flags: &FileOptions, timer: &mut Timer) -> Result<(Report, String), CliError> {
    let seed = crate::seed()?;
    let mut opts = sipcert_core::model::Options::default();
    flags.apply(&mut opts);
    opts.validate()?;

    let mut text = String::new();
    let mut fixtures = Vec::new();
    for case in cases() {
        let r = run_case(&case, flags, timer);
        let _ = writeln!(
            text,
            "{} fixture {}{}",
            if r.is_ok() { "PASS" } else { "FAIL" },
            case.name,
            r.as_ref().err().map(|e| format!(": {e}")).unwrap_or_default()
        );
        fixtures.push(json!({ "name": case.name, "passed": r.is_ok(), "detail": r.err() }));
    }
    timer.lap("fixtures");

    let suites = run_all(SuiteSizes::reduced(), seed, &opts);
    timer.lap("suites");
    for s in &suites {
        let _ = writeln!(
            text,
            "{} suite {} ({} instances, {} failures)",
            if s.passed() { "PASS" } else { "FAIL" },
            s.name,
            s.instances,
            s.failures
        );
        for n in &s.notes {
            let _ = writeln!(text, "    {n}");
        }
    }

    let total = fixtures.len() + suites.len();
    let passed = fixtures.iter().filter(|f| f["passed"] == true).count()
        + suites.iter().filter(|s| s.passed()).count();
    let verdict = if passed == total { Verdict::Pass } else { Verdict::Fail };
    let _ = writeln!(text, "{passed} of {total} checks passed");
    let report = Report::new(
        "selftest",
        verdict,
        json!({ "seed": seed, "passed": passed, "total": total, "fixtures": fixtures, "suites": suites }),
    );
    Ok((report, text))
}
