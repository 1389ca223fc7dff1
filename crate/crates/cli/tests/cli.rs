use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sipcert::{Report, Verdict};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.json"))
}

fn sipcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sipcert"))
        .args(args)
        .env_remove("SIPCERT_SEED")
        .output()
        .expect("binary runs")
}

/// Runs with `--json`, checks the exit code against the report, and
/// returns both.
fn report(args: &[&str]) -> (i32, Report) {
    let mut args = args.to_vec();
    args.push("--json");
    let out = sipcert(&args);
    let code = out.status.code().expect("exit code");
    let text = String::from_utf8(out.stdout).unwrap();
    let r: Report = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"));
    assert_eq!(code, r.exit_code);
    assert_eq!(code, r.verdict.exit_code());
    (code, r)
}

fn vector(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// A fixture with some top-level fields replaced, written to a temp file.
fn variant(name: &str, edits: Value) -> tempfile::NamedTempFile {
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(fixture(name)).unwrap()).unwrap();
    for (k, v) in edits.as_object().unwrap() {
        doc[k] = v.clone();
    }
    let f = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(f.path(), doc.to_string()).unwrap();
    f
}

fn path(f: &tempfile::NamedTempFile) -> &str {
    f.path().to_str().unwrap()
}

#[test]
fn certify_exn1() {
    let (code, r) = report(&["certify", fixture("exn1").to_str().unwrap()]);
    assert_eq!((code, r.verdict), (0, Verdict::Kkt));
    let c = &r.result["certificate"];
    assert!(close(&vector(&c["witness"]), &[0.0, 1.0], 1e-9));
    assert!(close(&[c["lambda"].as_f64().unwrap(), c["beta"].as_f64().unwrap()], &[0.5, 0.5], 1e-9));
    assert_eq!(c["coeffs"][0]["tag"], serde_json::json!({"sequence_limit": {"member": 1}}));
    assert!(r.assumptions.iter().any(|a| a.contains("k_max = 10")));
    assert!(r.timings.is_none());
}

#[test]
fn infeasible_candidate_exits_3() {
    let f = variant("exn1", serde_json::json!({"candidate": [-1, 0]}));
    let (code, r) = report(&["certify", path(&f)]);
    assert_eq!((code, r.verdict), (3, Verdict::Infeasible));
    assert!(r.error.unwrap().contains("infeasible"));
    assert_eq!(r.result["value"], -1.0);
}

#[test]
fn input_errors_exit_4_with_a_json_object() {
    let bad = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(bad.path(), "{\"dimension\": 2,").unwrap();
    let unknown = variant("exn1", serde_json::json!({"tolerance": 1e-3}));
    let no_candidate = tempfile::NamedTempFile::new().unwrap();
    std::fs::write(no_candidate.path(), r#"{"dimension": 1, "objective": "x1"}"#).unwrap();
    let bad_expr = variant("exn1", serde_json::json!({"objective": "x1 +* 2"}));
    for f in [&bad, &unknown, &no_candidate, &bad_expr] {
        let (code, r) = report(&["certify", path(f)]);
        assert_eq!((code, r.verdict), (4, Verdict::InputError));
        assert!(r.error.is_some());
    }
    let (code, _) = report(&["certify", "/nonexistent/problem.json"]);
    assert_eq!(code, 4);
    assert_eq!(sipcert(&["certify"]).status.code(), Some(4));
    assert_eq!(sipcert(&["certify", fixture("exn1").to_str().unwrap(), "--tol", "x"]).status.code(), Some(4));
}

#[test]
fn no_certificate_exits_2() {
    let (code, r) = report(&["certify", fixture("exn1_strict").to_str().unwrap()]);
    assert_eq!((code, r.verdict), (2, Verdict::NoCertificate));
}

#[test]
fn equality_pipelines() {
    let (_, r) = report(&["certify", fixture("circle").to_str().unwrap()]);
    assert_eq!(r.verdict, Verdict::Kkt);
    assert!(close(&vector(&r.result["certificate"]["w0"]), &[-0.5], 1e-9));
    let (code, r) = report(&["certify", fixture("duplicated_rows").to_str().unwrap()]);
    assert_eq!((code, r.verdict), (0, Verdict::EqualityDegenerate));
    assert_eq!(r.result["certificate"]["branch"], "not_onto");
    let (_, r) = report(&["certify", fixture("kernel_orthant").to_str().unwrap()]);
    assert_eq!(r.result["convex_set"]["report"]["pass"], true);
}

#[test]
fn composed_and_polyhedral_multipliers() {
    let (_, r) = report(&["certify", fixture("composed_orthant").to_str().unwrap()]);
    assert_eq!(r.result["pipeline"], "composed");
    assert!(close(&vector(&r.result["y_star"]), &[0.0, 1.0], 1e-9));
    assert_eq!(r.result["convex_set"]["report"]["pass"], true);
    let (_, r) = report(&["certify", fixture("halfplane").to_str().unwrap()]);
    assert_eq!(r.result["convex_set"]["report"]["pass"], true);
}

#[test]
fn sip_multipliers_are_reported() {
    let (_, r) = report(&["certify", fixture("linear_sip").to_str().unwrap()]);
    let sip = &r.result["sip"];
    assert!((sip["lambda0"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-6);
    assert_eq!(sip["terms"].as_array().unwrap().len(), 1);
    assert!(close(&vector(&sip["terms"][0]["t"]), &[0.5], 1e-6));
}

#[test]
fn tcset_generators() {
    let gens = |r: &Report| -> Vec<Vec<f64>> {
        r.result["final_hull"]["generators"].as_array().unwrap().iter().map(vector).collect()
    };
    let (_, r) = report(&["tcset", fixture("exn1").to_str().unwrap()]);
    let g = gens(&r);
    assert_eq!(g.len(), 2);
    assert!(g.iter().any(|v| close(v, &[1.0, 0.0], 1e-9)) && g.iter().any(|v| close(v, &[0.0, 1.0], 1e-9)));

    let f = variant("exn1", serde_json::json!({"candidate": [1, 1]}));
    let (code, r) = report(&["tcset", path(&f)]);
    assert_eq!(code, 0);
    assert_eq!(r.result["interior"], true);
    assert!(gens(&r).is_empty());

    let (_, r) = report(&["tcset", fixture("linear_sip").to_str().unwrap()]);
    let g = gens(&r);
    assert!(g.iter().any(|v| close(v, &[-1.0, 0.0], 1e-9)) && g.iter().any(|v| close(v, &[0.0, -1.0], 1e-9)));
}

#[test]
fn admissible_reports() {
    let (code, r) = report(&["admissible", fixture("orthant_cone").to_str().unwrap()]);
    assert_eq!((code, r.verdict), (0, Verdict::Admissible));
    assert_eq!(r.result["cone"]["interior"]["nonempty"], true);
    let (code, r) = report(&["admissible", fixture("hyperplane_cone").to_str().unwrap()]);
    assert_eq!((code, r.verdict), (2, Verdict::WeakAdmissible));
    assert_eq!(r.result["cone"]["interior"]["nonempty"], false);
    let (_, r) = report(&["admissible", fixture("exn1").to_str().unwrap()]);
    assert_eq!(r.verdict, Verdict::Admissible);
    assert!(r.result["cone"].is_null());
}

#[test]
fn scan_exn1() {
    let exn1 = fixture("exn1");
    let (code, r) = report(&["scan", exn1.to_str().unwrap(), "--box=-1,1", "--grid", "101", "--top", "3"]);
    assert_eq!(code, 0);
    let c = r.result["candidates"].as_array().unwrap();
    assert_eq!(c.len(), 3);
    assert!(close(&vector(&c[0]["x"]), &[0.0, 0.0], 1e-12));
    let (_, r) = report(&["scan", exn1.to_str().unwrap(), "--box=-1,1,-1,1", "--grid", "11", "--top", "1"]);
    assert_eq!(r.result["candidates"].as_array().unwrap().len(), 1);

    let (code, r) = report(&["scan", exn1.to_str().unwrap(), "--box=-3,-2", "--grid", "11"]);
    assert_eq!((code, r.verdict), (3, Verdict::Empty));
    let (code, _) = report(&["scan", exn1.to_str().unwrap(), "--box=0,1,2", "--grid", "11"]);
    assert_eq!(code, 4);
}

#[test]
fn flags_override_file_options() {
    let f = variant("exn1", serde_json::json!({"options": {"eps0": 0.1, "max_steps": 3}}));
    let first_eps = |r: &Report| r.result["certificate"]["ladder"][0]["eps"].as_f64().unwrap();
    let (_, r) = report(&["certify", path(&f)]);
    assert_eq!(first_eps(&r), 0.1);
    let (_, r) = report(&["certify", path(&f), "--eps0", "0.2"]);
    assert_eq!(first_eps(&r), 0.2);
    let (_, r) = report(&["certify", fixture("exn1").to_str().unwrap()]);
    assert_eq!(first_eps(&r), 0.01);
}

#[test]
fn grid_flag() {
    let (_, r) = report(&["certify", fixture("linear_sip").to_str().unwrap(), "--grid", "65"]);
    assert_eq!(r.verdict, Verdict::Kkt);
    assert!(r.assumptions.iter().any(|a| a.contains("65 points")));
    let (code, _) = report(&["certify", fixture("exn1").to_str().unwrap(), "--grid", "65"]);
    assert_eq!(code, 4);
}

#[test]
fn reports_are_deterministic_and_round_trip() {
    for args in [
        vec!["certify", "trig_sip"],
        vec!["tcset", "exn1"],
        vec!["admissible", "exn1"],
    ] {
        let file = fixture(args[1]);
        let run = || sipcert(&[args[0], file.to_str().unwrap(), "--json"]).stdout;
        let a = run();
        assert_eq!(a, run());
        let text = String::from_utf8(a).unwrap();
        let r: Report = serde_json::from_str(&text).unwrap();
        // parse(emit(r)) = r, and re-emission is byte-identical.
        let again = r.to_json();
        assert_eq!(serde_json::from_str::<Report>(&again).unwrap(), r);
        assert_eq!(again.trim_end(), text.trim_end());
    }
}

#[test]
fn floats_use_seventeen_digits() {
    let out = sipcert(&["certify", fixture("linear_sip").to_str().unwrap(), "--json"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"lambda0\": 3.333333333333333"), "{text}");
    assert!(text.contains("e-1"));
}

#[test]
fn timings_are_opt_in() {
    let (_, r) = report(&["certify", fixture("exn1").to_str().unwrap(), "--timings"]);
    let t = r.timings.unwrap();
    assert!(t.contains_key("total") && t.contains_key("certify"));
}

#[test]
fn seed_from_environment() {
    let run = |seed: &str| {
        Command::new(env!("CARGO_BIN_EXE_sipcert"))
            .args(["admissible", fixture("exn1").to_str().unwrap(), "--json"])
            .env("SIPCERT_SEED", seed)
            .output()
            .unwrap()
    };
    assert_eq!(run("7").stdout, run("7").stdout);
    assert_eq!(run("7").status.code(), Some(0));
    assert_eq!(run("seven").status.code(), Some(4));
}

#[test]
fn text_output() {
    let out = sipcert(&["certify", fixture("exn1").to_str().unwrap()]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("verdict:  Kkt (exit 0)"), "{text}");
    assert!(text.contains("assumed: "));
    let f = variant("exn1", serde_json::json!({"candidate": [-1, 0]}));
    let out = sipcert(&["certify", path(&f)]);
    assert!(out.stdout.is_empty());
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error: candidate is infeasible"));
}

#[test]
fn selftest_passes_and_detects_tampering() {
    let (code, r) = report(&["selftest"]);
    assert_eq!((code, r.verdict), (0, Verdict::Pass));
    assert_eq!(r.result["passed"], r.result["total"]);
    let suites = r.result["suites"].as_array().unwrap().len();
    let fixtures = r.result["fixtures"].as_array().unwrap().len();
    assert_eq!(r.result["total"].as_u64().unwrap() as usize, suites + fixtures);

    let (code, r) = report(&["selftest", "--tol", "1e-30"]);
    assert_eq!((code, r.verdict), (2, Verdict::Fail));
    assert!(r.result["passed"].as_u64() < r.result["total"].as_u64());
}
