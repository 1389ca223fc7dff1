//! Dense two-phase simplex with Bland's rule.
//!
//! The programs built by this crate have at most a few hundred columns and a
//! handful of rows, so a full tableau is the simplest correct choice. Bland's
//! rule (lowest eligible index enters, ties in the ratio test broken by lowest
//! basic index) rules out cycling, and pivoting is fully deterministic.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexSolution {
    pub status: LpStatus,
    /// Minimized objective (meaningful only when optimal).
    pub objective: f64,
    pub point: Vec<f64>,
    /// Direction of unbounded descent, when `status` is `Unbounded`.
    pub ray: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error("simplex iteration limit ({0}) reached")]
    IterationLimit(usize),
    #[error("numerical failure: reported optimum violates a constraint by {0:e}")]
    Numerical(f64),
    #[error("malformed linear program: {0}")]
    Malformed(String),
}

/// `minimize cᵀx` subject to linear rows and per-variable bounds.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<(Vec<f64>, Relation, f64)>,
}

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;

/// How an original variable is expressed through nonnegative columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = lower + col
    Shifted(usize, f64),
    /// x = upper - col
    Mirrored(usize, f64),
    /// x = pos - neg
    Split(usize, usize),
}

impl LinearProgram {
    /// `n` variables, all with bounds `[0, +inf)` and zero cost.
    pub fn new(n: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; n],
            lower: vec![0.0; n],
            upper: vec![f64::INFINITY; n],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn set_cost(&mut self, var: usize, c: f64) -> &mut Self {
        self.objective[var] = c;
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn free(&mut self, var: usize) -> &mut Self {
        self.set_bounds(var, f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_row(&mut self, coeffs: Vec<f64>, rel: Relation, rhs: f64) -> &mut Self {
        self.rows.push((coeffs, rel, rhs));
        self
    }

    /// Largest violation of any row or bound by `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (j, &v) in x.iter().enumerate() {
            worst = worst.max(self.lower[j] - v).max(v - self.upper[j]);
        }
        for (a, rel, b) in &self.rows {
            let lhs: f64 = a.iter().zip(x).map(|(p, q)| p * q).sum();
            let v = match rel {
                Relation::Le => lhs - b,
                Relation::Ge => b - lhs,
                Relation::Eq => (lhs - b).abs(),
            };
            worst = worst.max(v);
        }
        worst
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.num_vars();
        for (i, (a, _, b)) in self.rows.iter().enumerate() {
            if a.len() != n {
                return Err(LpError::Malformed(format!(
                    "row {i} has {} coefficients for {n} variables",
                    a.len()
                )));
            }
            if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
                return Err(LpError::Malformed(format!("row {i} is not finite")));
            }
        }
        if self.objective.iter().any(|v| !v.is_finite()) {
            return Err(LpError::Malformed("objective is not finite".into()));
        }
        for j in 0..n {
            if self.lower[j] > self.upper[j] || self.lower[j] == f64::INFINITY {
                return Err(LpError::Malformed(format!("variable {j} has empty bounds")));
            }
        }
        Ok(())
    }

    /// Solves the program; `tol` is the feasibility tolerance used both for
    /// declaring phase one successful and for the post-solve check.
    pub fn solve(&self, tol: f64) -> Result<SimplexSolution, LpError> {
        self.validate()?;
        let n = self.num_vars();

        // Map every variable onto nonnegative columns.
        let mut maps = Vec::with_capacity(n);
        let mut ncols = 0;
        let mut extra_rows: Vec<(Vec<(usize, f64)>, Relation, f64)> = Vec::new();
        for j in 0..n {
            let (lo, hi) = (self.lower[j], self.upper[j]);
            if lo.is_finite() {
                maps.push(VarMap::Shifted(ncols, lo));
                if hi.is_finite() {
                    extra_rows.push((vec![(ncols, 1.0)], Relation::Le, hi - lo));
                }
                ncols += 1;
            } else if hi.is_finite() {
                maps.push(VarMap::Mirrored(ncols, hi));
                ncols += 1;
            } else {
                maps.push(VarMap::Split(ncols, ncols + 1));
                ncols += 2;
            }
        }

        // Rows in terms of the structural columns.
        let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
        for (a, rel, b) in &self.rows {
            let mut coeffs = vec![0.0; ncols];
            let mut rhs = *b;
            for (j, &aj) in a.iter().enumerate() {
                if aj == 0.0 {
                    continue;
                }
                match maps[j] {
                    VarMap::Shifted(c, lo) => {
                        coeffs[c] += aj;
                        rhs -= aj * lo;
                    }
                    VarMap::Mirrored(c, hi) => {
                        coeffs[c] -= aj;
                        rhs -= aj * hi;
                    }
                    VarMap::Split(p, q) => {
                        coeffs[p] += aj;
                        coeffs[q] -= aj;
                    }
                }
            }
            rows.push((coeffs, *rel, rhs));
        }
        for (entries, rel, rhs) in extra_rows {
            let mut coeffs = vec![0.0; ncols];
            for (c, v) in entries {
                coeffs[c] = v;
            }
            rows.push((coeffs, rel, rhs));
        }
        // Constant offsets from shifted bounds do not affect the argmin.
        let mut cost = vec![0.0; ncols];
        for (j, &cj) in self.objective.iter().enumerate() {
            match maps[j] {
                VarMap::Shifted(c, _) => cost[c] += cj,
                VarMap::Mirrored(c, _) => cost[c] -= cj,
                VarMap::Split(p, q) => {
                    cost[p] += cj;
                    cost[q] -= cj;
                }
            }
        }

        let mut tab = Tableau::build(&rows, ncols);
        let result = tab.run(&cost, tol)?;

        let recover = |cols: &[f64]| -> Vec<f64> {
            maps.iter()
                .map(|m| match *m {
                    VarMap::Shifted(c, lo) => lo + cols[c],
                    VarMap::Mirrored(c, hi) => hi - cols[c],
                    VarMap::Split(p, q) => cols[p] - cols[q],
                })
                .collect()
        };
        let direction = |cols: &[f64]| -> Vec<f64> {
            maps.iter()
                .map(|m| match *m {
                    VarMap::Shifted(c, _) => cols[c],
                    VarMap::Mirrored(c, _) => -cols[c],
                    VarMap::Split(p, q) => cols[p] - cols[q],
                })
                .collect()
        };

        match result {
            Outcome::Infeasible => Ok(SimplexSolution {
                status: LpStatus::Infeasible,
                objective: f64::NAN,
                point: Vec::new(),
                ray: None,
            }),
            Outcome::Unbounded { point, ray } => Ok(SimplexSolution {
                status: LpStatus::Unbounded,
                objective: f64::NEG_INFINITY,
                point: recover(&point[..ncols]),
                ray: Some(direction(&ray[..ncols])),
            }),
            Outcome::Optimal { point } => {
                let x = recover(&point[..ncols]);
                let scale = 1.0
                    + self
                        .rows
                        .iter()
                        .map(|(a, _, b)| b.abs().max(a.iter().fold(0.0, |m: f64, v| m.max(v.abs()))))
                        .fold(0.0, f64::max);
                let viol = self.violation(&x);
                if viol > tol * scale * 10.0 {
                    return Err(LpError::Numerical(viol));
                }
                let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                Ok(SimplexSolution {
                    status: LpStatus::Optimal,
                    objective,
                    point: x,
                    ray: None,
                })
            }
        }
    }
}

enum Outcome {
    Optimal { point: Vec<f64> },
    Unbounded { point: Vec<f64>, ray: Vec<f64> },
    Infeasible,
}

struct Tableau {
    /// m rows of width `width + 1` (last entry is the right-hand side).
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    /// Total columns: structural + slack + artificial.
    width: usize,
    first_artificial: usize,
}

impl Tableau {
    fn build(rows: &[(Vec<f64>, Relation, f64)], ncols: usize) -> Tableau {
        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.1 != Relation::Eq).count();
        // Rows needing an artificial: Ge and Eq after normalizing rhs >= 0,
        // which turns some Le rows into Ge rows.
        let normalized: Vec<(Vec<f64>, Relation, f64)> = rows
            .iter()
            .map(|(a, rel, b)| {
                if *b < 0.0 {
                    let flipped = match rel {
                        Relation::Le => Relation::Ge,
                        Relation::Ge => Relation::Le,
                        Relation::Eq => Relation::Eq,
                    };
                    (a.iter().map(|v| -v).collect(), flipped, -b)
                } else {
                    (a.clone(), *rel, *b)
                }
            })
            .collect();
        let n_art = normalized.iter().filter(|r| r.1 != Relation::Le).count();
        let width = ncols + n_slack + n_art;
        let first_artificial = ncols + n_slack;
        let mut a = vec![vec![0.0; width + 1]; m];
        let mut basis = vec![0; m];
        let mut slack = ncols;
        let mut art = first_artificial;
        for (i, (coeffs, rel, rhs)) in normalized.iter().enumerate() {
            a[i][..ncols].copy_from_slice(coeffs);
            a[i][width] = *rhs;
            match rel {
                Relation::Le => {
                    a[i][slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Relation::Ge => {
                    a[i][slack] = -1.0;
                    slack += 1;
                    a[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Relation::Eq => {
                    a[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Tableau {
            a,
            basis,
            width,
            first_artificial,
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut r: Vec<f64> = (0..=self.width)
            .map(|j| if j < self.width { cost[j] } else { 0.0 })
            .collect();
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (rj, aij) in r.iter_mut().zip(&self.a[i]) {
                    *rj -= cb * aij;
                }
            }
        }
        r
    }

    fn pivot(&mut self, row: usize, col: usize, obj: &mut [f64]) {
        let p = self.a[row][col];
        for v in self.a[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.a[row].clone();
        for (i, r) in self.a.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        let f = obj[col];
        if f != 0.0 {
            for (v, pv) in obj.iter_mut().zip(&pivot_row) {
                *v -= f * pv;
            }
            obj[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Bland-rule iterations over columns `< limit`. Returns the entering
    /// column when unbounded.
    fn iterate(&mut self, obj: &mut [f64], limit: usize, max_iter: usize) -> Result<Option<usize>, LpError> {
        for _ in 0..max_iter {
            let entering = (0..limit).find(|&j| obj[j] < -COST_TOL && !self.basis.contains(&j));
            let Some(col) = entering else {
                return Ok(None);
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.a.iter().enumerate() {
                let aij = row[col];
                if aij > PIVOT_TOL {
                    let ratio = row[self.width] / aij;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            if (!tie && ratio < br) || (tie && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                None => return Ok(Some(col)),
                Some((row, _)) => self.pivot(row, col, obj),
            }
        }
        Err(LpError::IterationLimit(max_iter))
    }

    fn point(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.width];
        for (i, &b) in self.basis.iter().enumerate() {
            x[b] = self.a[i][self.width].max(0.0);
        }
        x
    }

    fn run(&mut self, cost: &[f64], tol: f64) -> Result<Outcome, LpError> {
        let m = self.a.len();
        let max_iter = 50 * (m + self.width) + 1000;

        if self.first_artificial < self.width {
            let mut phase1 = vec![0.0; self.width];
            for c in phase1.iter_mut().skip(self.first_artificial) {
                *c = 1.0;
            }
            let mut obj = self.reduced_costs(&phase1);
            self.iterate(&mut obj, self.width, max_iter)?;
            let infeasibility: f64 = self
                .basis
                .iter()
                .enumerate()
                .filter(|(_, &b)| b >= self.first_artificial)
                .map(|(i, _)| self.a[i][self.width])
                .sum();
            if infeasibility > tol {
                return Ok(Outcome::Infeasible);
            }
            // Drive artificial columns out of the basis where possible; rows
            // where that fails are redundant and keep a zero artificial.
            for i in 0..m {
                if self.basis[i] >= self.first_artificial {
                    let col = (0..self.first_artificial).find(|&j| self.a[i][j].abs() > 1e-9);
                    if let Some(col) = col {
                        self.pivot(i, col, &mut obj);
                    } else {
                        self.a[i][self.width] = 0.0;
                    }
                }
            }
        }

        let mut full_cost = vec![0.0; self.width];
        full_cost[..cost.len()].copy_from_slice(cost);
        let mut obj = self.reduced_costs(&full_cost);
        match self.iterate(&mut obj, self.first_artificial, max_iter)? {
            None => Ok(Outcome::Optimal {
                point: self.point(),
            }),
            Some(col) => {
                let mut ray = vec![0.0; self.width];
                ray[col] = 1.0;
                for (i, &b) in self.basis.iter().enumerate() {
                    ray[b] = -self.a[i][col];
                }
                Ok(Outcome::Unbounded {
                    point: self.point(),
                    ray,
                })
            }
        }
    }
}
