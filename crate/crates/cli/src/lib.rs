//! Command-line front end: problem files in, JSON certificate reports out.

pub mod commands;
pub mod file;
pub mod json;
pub mod selftest;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sipcert_core::model::ModelError;
use sipcert_core::multipliers::CertifyError;
use thiserror::Error;

use crate::file::FileOptions;

/// Seed used for sampling when `SIPCERT_SEED` is unset.
pub const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("candidate is infeasible: {tag} has value {value:e}")]
    Infeasible { tag: String, value: f64 },
    #[error("{0}")]
    Empty(String),
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Infeasible { tag, value } => CliError::Infeasible { tag, value },
            e => CliError::Input(e.to_string()),
        }
    }
}

impl From<CertifyError> for CliError {
    fn from(e: CertifyError) -> Self {
        match e {
            CertifyError::Model(m) => m.into(),
            e => CliError::Input(e.to_string()),
        }
    }
}

/// Outcome of a command. The exit code is a function of this alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Unconstrained,
    Fj,
    Kkt,
    EqualityDegenerate,
    NoCertificate,
    /// `tcset` and `scan` finished.
    Computed,
    Admissible,
    WeakAdmissible,
    Pass,
    Fail,
    Infeasible,
    /// Nothing feasible on the scan grid.
    Empty,
    InputError,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        use Verdict::*;
        match self {
            Unconstrained | Fj | Kkt | EqualityDegenerate | Computed | Admissible | Pass => 0,
            NoCertificate | WeakAdmissible | Fail => 2,
            Infeasible | Empty => 3,
            InputError => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub verdict: Verdict,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub result: Value,
    #[serde(default)]
    pub assumptions: Vec<String>,
    /// Seconds per phase; only with `--timings`, so reports stay reproducible.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings: Option<BTreeMap<String, f64>>,
}

impl Report {
    pub fn new(command: &str, verdict: Verdict, result: Value) -> Self {
        Report {
            command: command.to_string(),
            verdict,
            exit_code: verdict.exit_code(),
            error: None,
            result,
            assumptions: Vec::new(),
            timings: None,
        }
    }

    pub fn from_error(command: &str, err: &CliError) -> Self {
        let (verdict, result) = match err {
            CliError::Input(_) => (Verdict::InputError, Value::Null),
            CliError::Empty(_) => (Verdict::Empty, Value::Null),
            CliError::Infeasible { tag, value } => (
                Verdict::Infeasible,
                serde_json::json!({ "tag": tag, "value": value }),
            ),
        };
        Report {
            error: Some(err.to_string()),
            ..Report::new(command, verdict, result)
        }
    }

    pub fn to_json(&self) -> String {
        json::to_string(self, true).expect("reports serialize")
    }
}

#[derive(Debug, Parser)]
#[command(name = "sipcert", version, about = "Certify first-order optimality of candidate points")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide whether the candidate admits Fritz John / KKT multipliers.
    Certify(ProblemArgs),
    /// Print the ε-ladder of near-active gradient hulls.
    Tcset(ProblemArgs),
    /// Admissibility diagnostics of the constraint family at the candidate.
    Admissible(ProblemArgs),
    /// Coarse grid search for feasible candidates (not a solver).
    Scan(ScanArgs),
    /// Run the bundled fixtures and the property suites.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Tuning {
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub eps0: Option<f64>,
    #[arg(long)]
    pub shrink: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Refinement depth of parametric index sets.
    #[arg(long)]
    pub refine: Option<usize>,
}

impl Tuning {
    pub fn overrides(&self) -> FileOptions {
        FileOptions {
            tol: self.tol,
            eps0: self.eps0,
            shrink: self.shrink,
            max_steps: self.max_steps,
            refine_depth: self.refine,
            ..FileOptions::default()
        }
    }
}

#[derive(Debug, Clone, Default, Args)]
pub struct Output {
    /// Print the full JSON report instead of a summary.
    #[arg(long)]
    pub json: bool,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    pub timings: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    pub file: PathBuf,
    #[command(flatten)]
    pub tuning: Tuning,
    /// Grid points per axis of a parametric index box.
    #[arg(long)]
    pub grid: Option<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    pub file: PathBuf,
    /// Search box as `lo,hi` (every axis) or `lo1,hi1,lo2,hi2,…`.
    #[arg(long = "box", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub bounds: Vec<f64>,
    /// Grid points per axis.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    /// Number of candidates to report.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    #[command(flatten)]
    pub tuning: Tuning,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SelftestArgs {
    #[command(flatten)]
    pub tuning: Tuning,
    #[command(flatten)]
    pub output: Output,
}

/// Seed from `SIPCERT_SEED`, or [`DEFAULT_SEED`].
pub fn seed() -> Result<u64, CliError> {
    match std::env::var("SIPCERT_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map_err(|_| CliError::Input(format!("SIPCERT_SEED must be an unsigned integer, got {s:?}"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

/// Runs one command and returns its report and the text summary.
pub fn run(command: &Command) -> (Report, String) {
    commands::run(command)
}
