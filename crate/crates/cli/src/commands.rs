use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Instant;

use serde_json::{json, Value};
use sipcert_core::geometry::{cone_interior_nonempty, recession_cone};
use sipcert_core::model::{
    admissible_diagnostics, feasibility, Admissibility, ConstraintFamily, Options, Problem,
};
use sipcert_core::multipliers::{
    certify_fj, sip_multipliers, tc_approx, Certificate, CertificateKind, StopReason,
};
use sipcert_core::par;
use sipcert_core::reduction::{certify_composed, certify_equality, convex_set_multiplier};
use sipcert_core::Execution;

use crate::file::{FileOptions, ProblemFile};
use crate::{selftest, CliError, Command, Report, ScanArgs, Verdict};

/// Largest scan grid, counted in points.
pub const MAX_SCAN_POINTS: usize = 20_000_000;

/// Phase timer; only reported with `--timings`.
#[derive(Debug)]
pub struct Timer {
    last: Instant,
    phases: BTreeMap<String, f64>,
}

impl Timer {
    pub fn start() -> Self {
        Timer {
            last: Instant::now(),
            phases: BTreeMap::new(),
        }
    }

    pub fn lap(&mut self, phase: &str) {
        let now = Instant::now();
        *self.phases.entry(phase.to_string()).or_default() += (now - self.last).as_secs_f64();
        self.last = now;
    }
}

type Outcome = Result<(Report, String), CliError>;

pub fn run(command: &Command) -> (Report, String) {
    let mut timer = Timer::start();
    let (name, output, outcome) = match command {
        Command::Certify(a) => ("certify", &a.output, with_file(a, &mut timer, certify)),
        Command::Tcset(a) => ("tcset", &a.output, with_file(a, &mut timer, tcset)),
        Command::Admissible(a) => ("admissible", &a.output, with_file(a, &mut timer, admissible)),
        Command::Scan(a) => ("scan", &a.output, scan_file(a, &mut timer)),
        Command::Selftest(a) => (
            "selftest",
            &a.output,
            selftest::run(&a.tuning.overrides(), &mut timer),
        ),
    };
    let (mut report, mut text) =
        outcome.unwrap_or_else(|e| (Report::from_error(name, &e), format!("error: {e}")));
    for a in &report.assumptions {
        let _ = writeln!(text, "assumed: {a}");
    }
    if output.timings {
        timer.lap("output");
        let mut t = timer.phases;
        t.insert("total".into(), t.values().sum());
        report.timings = Some(t);
    }
    (report, text)
}

fn with_file(
    a: &crate::ProblemArgs,
    timer: &mut Timer,
    cmd: fn(&ProblemFile, &FileOptions, Option<usize>, &mut Timer) -> Outcome,
) -> Outcome {
    let file = ProblemFile::load(&a.file)?;
    timer.lap("load");
    cmd(&file, &a.tuning.overrides(), a.grid, timer)
}

/// Problem, options and candidate from a file, with flag overrides.
fn prepare(file: &ProblemFile, flags: &FileOptions, grid: Option<usize>) -> Result<(Problem, Options), CliError> {
    let prob = file.problem(grid)?;
    let opts = file.options(flags);
    opts.validate()?;
    Ok((prob, opts))
}

fn kind_verdict(kind: CertificateKind) -> Verdict {
    match kind {
        CertificateKind::Unconstrained => Verdict::Unconstrained,
        CertificateKind::FJ => Verdict::Fj,
        CertificateKind::KKT => Verdict::Kkt,
        CertificateKind::EqualityDegenerate => Verdict::EqualityDegenerate,
        CertificateKind::NoCertificate => Verdict::NoCertificate,
    }
}

/// Standing assumptions the numerics cannot check, for this problem.
pub fn assumptions(prob: &Problem, opts: &Options) -> Vec<String> {
    let mut out = Vec::new();
    match prob.inequality() {
        Some(fam @ ConstraintFamily::Finite(_)) if fam.has_sequences() => {
            out.push(format!(
                "countable sequences truncated at k_max = {}; each is closed up by its limit member",
                opts.k_max
            ));
            out.push("inactive sequence members are equi-lower-semicontinuous at the candidate".into());
        }
        Some(ConstraintFamily::Parametric { index, .. }) => {
            let grid = match index {
                sipcert_core::model::IndexSet::Box { grid, .. } => *grid,
                sipcert_core::model::IndexSet::Finite(ts) => ts.len(),
            };
            out.push(format!(
                "index box sampled with {grid} points per axis and refined to depth {} around grid minima",
                opts.refine_depth
            ));
            out.push("the parametric family is equi-lower-semicontinuous at the candidate".into());
        }
        _ => {}
    }
    if prob.inequality().is_some() {
        out.push("the family is equi-Lipschitz on a neighbourhood of the candidate".into());
    }
    if prob.inner_map().is_some() {
        out.push("the inner map is continuously differentiable near the candidate".into());
    }
    out
}

fn ladder_note(c: &Certificate, out: &mut Vec<String>) {
    if c.approximate {
        out.push(format!(
            "the ε-ladder stopped ({:?}) without stabilizing; the verdict rests on its last step",
            c.stop
        ));
    }
}

/// Checks `z` as a multiplier of a polyhedral family at `image`.
fn convex_set(prob: &Problem, image: &[f64], z: Option<Vec<f64>>, opts: &Options) -> Result<Value, CliError> {
    let (Some(ConstraintFamily::Polyhedral(a)), Some(z)) = (prob.inequality(), z) else {
        return Ok(Value::Null);
    };
    let r = convex_set_multiplier(a, image, &z, opts.tol).map_err(|e| CliError::Input(e.to_string()))?;
    Ok(json!({ "z": z, "report": r }))
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6e}")).collect();
    format!("({})", parts.join(", "))
}

pub fn certify(file: &ProblemFile, flags: &FileOptions, grid: Option<usize>, timer: &mut Timer) -> Outcome {
    let (prob, opts) = prepare(file, flags, grid)?;
    let x = file.candidate()?;
    let mut notes = assumptions(&prob, &opts);
    let mut text = String::new();
    let (verdict, result) = if prob.equality().is_some() {
        let c = certify_equality(&prob, x, &opts)?;
        timer.lap("certify");
        if let Some(r) = &c.restricted {
            ladder_note(r, &mut notes);
        }
        notes.extend(c.assumptions.iter().cloned());
        let image = feasibility(&prob, x, &opts)?.image.unwrap_or_else(|| x.to_vec());
        let convex = convex_set(&prob, &image, c.z0.clone(), &opts)?;
        let _ = writeln!(text, "branch:   {:?}", c.branch);
        let _ = writeln!(text, "lambda0:  {:.6e}", c.lambda0);
        let _ = writeln!(text, "w0:       {}", fmt_vec(&c.w0));
        if let Some(z) = &c.z0 {
            let _ = writeln!(text, "z0:       {}", fmt_vec(z));
        }
        let _ = writeln!(text, "residual: {:.3e}", c.residual);
        (kind_verdict(c.kind), json!({ "pipeline": "equality", "certificate": c, "convex_set": convex }))
    } else {
        let (cert, extra) = if prob.inner_map().is_some() {
            let c = certify_composed(&prob, x, &opts)?;
            let image = c.image.clone().unwrap_or_else(|| x.to_vec());
            let z = c.y_star.as_ref().map(|y| y.iter().map(|v| c.certificate.beta * v).collect());
            let convex = convex_set(&prob, &image, z, &opts)?;
            let extra = json!({
                "pipeline": "composed",
                "y_star": c.y_star,
                "y_nonzero": c.y_nonzero,
                "chain_residual": c.chain_residual,
                "image": c.image,
                "convex_set": convex,
            });
            (c.certificate, extra)
        } else {
            let c = certify_fj(&prob, x, &opts)?;
            let z = c.kind.is_certified().then(|| c.witness.iter().map(|v| c.beta * v).collect());
            let convex = convex_set(&prob, x, z, &opts)?;
            let sip = match prob.inequality() {
                Some(ConstraintFamily::Parametric { .. }) if c.kind.is_certified() && c.stop != StopReason::Interior => {
                    serde_json::to_value(sip_multipliers(&prob, x, &opts)?).expect("serializable")
                }
                _ => Value::Null,
            };
            (c, json!({ "pipeline": "inequality", "sip": sip, "convex_set": convex }))
        };
        timer.lap("certify");
        ladder_note(&cert, &mut notes);
        let _ = writeln!(text, "lambda:   {:.6e}", cert.lambda);
        let _ = writeln!(text, "beta:     {:.6e}", cert.beta);
        let _ = writeln!(text, "witness:  {}", fmt_vec(&cert.witness));
        for w in &cert.coeffs {
            let _ = writeln!(text, "  {:.6e} × {} {}", w.weight, w.tag, fmt_vec(&w.generator));
        }
        let _ = writeln!(text, "residual: {:.3e}", cert.residual);
        let _ = writeln!(text, "ladder:   {} steps, stop {:?}", cert.ladder.len(), cert.stop);
        let mut result = extra;
        result["certificate"] = serde_json::to_value(&cert).expect("serializable");
        (kind_verdict(cert.kind), result)
    };
    let mut report = Report::new("certify", verdict, result);
    report.assumptions = notes;
    let text = format!("verdict:  {:?} (exit {})\n{text}", verdict, report.exit_code);
    Ok((report, text))
}

pub fn tcset(file: &ProblemFile, flags: &FileOptions, grid: Option<usize>, timer: &mut Timer) -> Outcome {
    let (prob, opts) = prepare(file, flags, grid)?;
    let x = file.candidate()?;
    let tc = tc_approx(&prob, x, &opts)?;
    timer.lap("ladder");
    let mut text = String::new();
    let _ = writeln!(text, "stop: {:?}, converged: {}, interior: {}", tc.stop, tc.converged, tc.interior);
    let _ = writeln!(text, "{:>14} {:>10} {:>12}", "eps", "generators", "gap");
    for s in &tc.ladder {
        let gap = s.gap.map_or("-".to_string(), |g| format!("{g:.3e}"));
        let _ = writeln!(text, "{:>14.6e} {:>10} {:>12}", s.eps, s.hull.len(), gap);
    }
    let _ = writeln!(text, "final generators:");
    for (tag, g) in tc.final_hull.iter() {
        let _ = writeln!(text, "  {} {}", tag, fmt_vec(g));
    }
    let mut notes = assumptions(&prob, &opts);
    if !tc.converged && !tc.interior && tc.stop == StopReason::MaxSteps {
        notes.push("the ε-ladder stopped at max_steps without stabilizing".into());
    }
    let mut report = Report::new("tcset", Verdict::Computed, serde_json::to_value(&tc).expect("serializable"));
    report.assumptions = notes;
    Ok((report, text))
}

pub fn admissible(file: &ProblemFile, flags: &FileOptions, grid: Option<usize>, timer: &mut Timer) -> Outcome {
    let (prob, opts) = prepare(file, flags, grid)?;
    let x = file.candidate()?;
    let d = admissible_diagnostics(&prob, x, opts.eps0, crate::seed()?, &opts)?;
    let cone = match prob.inequality() {
        Some(ConstraintFamily::Polyhedral(a)) => {
            // The interior criterion is stated for cones; other polyhedra
            // are judged through their recession cone.
            let c = if a.is_cone() { a.clone() } else { recession_cone(a) };
            let r = cone_interior_nonempty(&c, opts.tol).map_err(|e| CliError::Input(e.to_string()))?;
            Some(json!({ "recession": !a.is_cone(), "interior": r }))
        }
        _ => None,
    };
    timer.lap("diagnostics");
    let verdict = match d.status {
        Admissibility::Admissible => Verdict::Admissible,
        Admissibility::WeakAdmissible => Verdict::WeakAdmissible,
    };
    let mut text = String::new();
    let _ = writeln!(text, "status: {:?} (exit {})", d.status, verdict.exit_code());
    if let Some(h) = d.hull_distance {
        let _ = writeln!(text, "distance from 0 to the gradient hull: {h:.6e}");
    }
    let _ = writeln!(text, "Lipschitz estimate: {:.6e}", d.lipschitz);
    if let Some(c) = &cone {
        let _ = writeln!(text, "cone interior nonempty: {}", c["interior"]["nonempty"]);
    }
    let mut notes = assumptions(&prob, &opts);
    notes.extend(d.assumptions.iter().cloned());
    let mut report = Report::new("admissible", verdict, json!({ "diagnostics": d, "cone": cone }));
    report.assumptions = notes;
    Ok((report, text))
}

fn scan_file(a: &ScanArgs, timer: &mut Timer) -> Outcome {
    let file = ProblemFile::load(&a.file)?;
    timer.lap("load");
    scan(&file, &a.tuning.overrides(), &a.bounds, a.grid, a.top, timer)
}

/// Grid search over a box for the best feasible objective values.
pub fn scan(
    file: &ProblemFile,
    flags: &FileOptions,
    bounds: &[f64],
    grid: usize,
    top: usize,
    timer: &mut Timer,
) -> Outcome {
    let (prob, opts) = prepare(file, flags, None)?;
    let p = prob.dim();
    let (lower, upper): (Vec<f64>, Vec<f64>) = match bounds.len() {
        2 => (vec![bounds[0]; p], vec![bounds[1]; p]),
        n if n == 2 * p => bounds.chunks(2).map(|c| (c[0], c[1])).unzip(),
        n => return Err(CliError::Input(format!("--box needs 2 or {} numbers, got {n}", 2 * p))),
    };
    if lower.iter().zip(&upper).any(|(l, u)| !l.is_finite() || !u.is_finite() || l > u) {
        return Err(CliError::Input("--box needs finite lo <= hi on every axis".into()));
    }
    if grid < 2 || top == 0 {
        return Err(CliError::Input("--grid must be at least 2 and --top at least 1".into()));
    }
    let total = (0..p).try_fold(1usize, |acc, _| acc.checked_mul(grid)).filter(|&n| n <= MAX_SCAN_POINTS);
    let Some(total) = total else {
        return Err(CliError::Input(format!("scan grid exceeds {MAX_SCAN_POINTS} points")));
    };
    let point = |mut idx: usize| -> Vec<f64> {
        let mut x = vec![0.0; p];
        for axis in (0..p).rev() {
            let i = idx % grid;
            idx /= grid;
            x[axis] = if i + 1 == grid {
                upper[axis]
            } else {
                lower[axis] + (upper[axis] - lower[axis]) * i as f64 / (grid - 1) as f64
            };
        }
        x
    };
    // Points where anything fails to evaluate are skipped.
    let evaluated = par::map_range(Execution::Parallel, total, |i| {
        let x = point(i);
        let f = prob.objective().eval(&x, &[]).ok().filter(|f| f.is_finite())?;
        let feas = feasibility(&prob, &x, &opts).ok()?;
        feas.feasible.then_some((i, f, feas.infimum))
    });
    let mut feasible: Vec<(usize, f64, Option<f64>)> = evaluated.into_iter().flatten().collect();
    timer.lap("scan");
    if feasible.is_empty() {
        return Err(CliError::Empty(format!("no feasible point among {total} grid points")));
    }
    let count = feasible.len();
    feasible.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    feasible.truncate(top);
    let mut text = String::new();
    let _ = writeln!(text, "{count} of {total} grid points feasible; best {}:", feasible.len());
    let candidates: Vec<Value> = feasible
        .iter()
        .map(|&(i, f, slack)| {
            let x = point(i);
            let _ = writeln!(text, "  f = {f:.6e} at {}", fmt_vec(&x));
            json!({ "x": x, "objective": f, "slack": slack })
        })
        .collect();
    let mut report = Report::new(
        "scan",
        Verdict::Computed,
        json!({ "grid": grid, "points": total, "feasible": count, "candidates": candidates }),
    );
    report.assumptions = vec!["grid search only: candidates still need certify".into()];
    Ok((report, text))
}
