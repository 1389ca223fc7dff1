//! Problem files: a JSON document describing one problem and, optionally, a
//! candidate point and solver options.
//!
//! ```json
//! {
//!   "dimension": 2,
//!   "objective": "-x1^2 - x2",
//!   "constraints": {"finite": ["x1", {"sequence": "x2 + t1"}]},
//!   "candidate": [0, 0]
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sipcert_core::exprlang::ExprFn;
use sipcert_core::geometry::Polyhedron;
use sipcert_core::model::{ConstraintFamily, FamilyMember, IndexSet, Options, Problem};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub dimension: usize,
    pub objective: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Constraints>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_map: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equality: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub candidate: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<FileOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Constraints {
    Finite(Vec<FiniteMember>),
    Parametric(Parametric),
    Polyhedral(Polyhedral),
}

/// A plain constraint `φ(x) ≥ 0`, or a countable sequence written with `t1`
/// standing for `1/k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FiniteMember {
    Single(String),
    Sequence(SequenceMember),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceMember {
    pub sequence: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Parametric {
    pub h: String,
    pub t_dim: usize,
    #[serde(rename = "box")]
    pub bounds: BoxBounds,
    pub grid: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polyhedral {
    pub normals: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
}

/// Solver options; anything left out keeps its default.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileOptions {
    pub tol: Option<f64>,
    pub tol_lp: Option<f64>,
    pub tol_feas: Option<f64>,
    pub tol_kink: Option<f64>,
    pub tol_hull: Option<f64>,
    pub tol_rank: Option<f64>,
    pub eps0: Option<f64>,
    pub shrink: Option<f64>,
    pub max_steps: Option<usize>,
    pub refine_depth: Option<usize>,
    pub k_max: Option<usize>,
    pub strict_active: Option<bool>,
}

impl FileOptions {
    /// Overlays the fields that are set onto `opts`.
    pub fn apply(&self, opts: &mut Options) {
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { opts.$f = v; } )*};
        }
        set!(tol, tol_lp, tol_feas, tol_kink, tol_hull, tol_rank, eps0, shrink, max_steps, refine_depth, k_max, strict_active);
    }
}

impl ProblemFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Input(format!("problem file: {e}")))
    }

    /// Defaults, then the file's options, then `flags`.
    pub fn options(&self, flags: &FileOptions) -> Options {
        let mut opts = Options::default();
        if let Some(o) = &self.options {
            o.apply(&mut opts);
        }
        flags.apply(&mut opts);
        opts
    }

    pub fn candidate(&self) -> Result<&[f64], CliError> {
        self.candidate
            .as_deref()
            .ok_or_else(|| CliError::Input("problem file has no \"candidate\"".into()))
    }

    /// Builds the problem; `grid` overrides the parametric grid size.
    pub fn problem(&self, grid: Option<usize>) -> Result<Problem, CliError> {
        let p = self.dimension;
        let parse = |what: &str, src: &str, arity_x: usize, arity_t: usize| {
            ExprFn::parse(src, arity_x, arity_t).map_err(|e| CliError::Input(format!("{what}: {e}")))
        };
        let list = |what: &str, srcs: &[String]| -> Result<Vec<ExprFn>, CliError> {
            srcs.iter()
                .enumerate()
                .map(|(i, s)| parse(&format!("{what}[{i}]"), s, p, 0))
                .collect()
        };
        let objective = parse("objective", &self.objective, p, 0)?;
        let inner_map = self.inner_map.as_deref().map(|m| list("inner_map", m)).transpose()?;
        let equality = self.equality.as_deref().map(|m| list("equality", m)).transpose()?;
        // Constraints live in the inner map's image space when there is one.
        let q = inner_map.as_ref().map_or(p, Vec::len);

        let family = match &self.constraints {
            None => None,
            Some(Constraints::Finite(ms)) => {
                let members = ms
                    .iter()
                    .enumerate()
                    .map(|(i, m)| match m {
                        FiniteMember::Single(s) => {
                            parse(&format!("finite[{i}]"), s, q, 0).map(FamilyMember::Single)
                        }
                        FiniteMember::Sequence(s) => {
                            parse(&format!("finite[{i}]"), &s.sequence, q, 1).map(FamilyMember::Sequence)
                        }
                    })
                    .collect::<Result<_, _>>()?;
                Some(ConstraintFamily::Finite(members))
            }
            Some(Constraints::Parametric(par)) => {
                if par.bounds.lower.len() != par.t_dim || par.bounds.upper.len() != par.t_dim {
                    return Err(CliError::Input(format!(
                        "parametric box must have t_dim = {} bounds per side",
                        par.t_dim
                    )));
                }
                Some(ConstraintFamily::Parametric {
                    h: parse("parametric.h", &par.h, q, par.t_dim)?,
                    index: IndexSet::Box {
                        lower: par.bounds.lower.clone(),
                        upper: par.bounds.upper.clone(),
                        grid: grid.unwrap_or(par.grid),
                    },
                })
            }
            Some(Constraints::Polyhedral(poly)) => {
                let a = Polyhedron::new(q, poly.normals.clone(), poly.offsets.clone())
                    .map_err(|e| CliError::Input(format!("polyhedral: {e}")))?;
                Some(ConstraintFamily::Polyhedral(a))
            }
        };
        if grid.is_some() && !matches!(self.constraints, Some(Constraints::Parametric(_))) {
            return Err(CliError::Input("--grid needs a parametric constraint family".into()));
        }
        Problem::new(p, objective, family, inner_map, equality).map_err(|e| CliError::Input(e.to_string()))
    }

    /// The polyhedron of a polyhedral family.
    pub fn polyhedron(&self, prob: &Problem) -> Option<Polyhedron> {
        match prob.inequality() {
            Some(ConstraintFamily::Polyhedral(a)) => Some(a.clone()),
            _ => None,
        }
    }
}
