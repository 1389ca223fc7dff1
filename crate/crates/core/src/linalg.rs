//! Small dense linear algebra helpers. Every matrix here has at most a few
//! hundred entries, so plain row-major `Vec<f64>` storage is enough.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|v| v * s).collect()
}

/// `y += a * x`
pub fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// `sum_i weights[i] * vectors[i]`, with `dim` the common length.
pub fn combination(vectors: &[Vec<f64>], weights: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (v, &w) in vectors.iter().zip(weights) {
        if w != 0.0 {
            axpy(&mut out, w, v);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds from row vectors; `cols` is needed when `rows` is empty.
    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Self {
        let mut m = Matrix::zeros(rows.len(), cols);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), cols, "ragged matrix rows");
            m.data[i * cols..(i + 1) * cols].copy_from_slice(r);
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_vecs(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.data)
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    /// `selfᵀ v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            axpy(&mut out, vi, self.row(i));
        }
        out
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

/// Outcome of Gauss-Jordan elimination with partial (row) pivoting, scanning
/// columns left to right.
#[derive(Debug, Clone)]
pub struct Echelon {
    pub rref: Matrix,
    pub pivot_cols: Vec<usize>,
    /// Magnitude of each accepted pivot before normalization.
    pub pivots: Vec<f64>,
}

impl Echelon {
    pub fn rank(&self) -> usize {
        self.pivot_cols.len()
    }

    /// One basis vector per free column, in column order.
    pub fn null_space(&self) -> Vec<Vec<f64>> {
        let n = self.rref.cols();
        let free: Vec<usize> = (0..n).filter(|j| !self.pivot_cols.contains(j)).collect();
        free.iter()
            .map(|&f| {
                let mut v = vec![0.0; n];
                v[f] = 1.0;
                for (r, &pc) in self.pivot_cols.iter().enumerate() {
                    v[pc] = -self.rref.get(r, f);
                }
                v
            })
            .collect()
    }
}

/// Reduced row echelon form; entries below `tol` in magnitude are treated as
/// zero when choosing pivots.
pub fn echelon(m: &Matrix, tol: f64) -> Echelon {
    let mut a = m.clone();
    let (rows, cols) = (a.rows(), a.cols());
    let mut pivot_cols = Vec::new();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, mag) = (r..rows)
            .map(|i| (i, a.get(i, c).abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if mag <= tol {
            for i in r..rows {
                a.set(i, c, 0.0);
            }
            continue;
        }
        a.swap_rows(r, best);
        let p = a.get(r, c);
        for j in 0..cols {
            a.set(r, j, a.get(r, j) / p);
        }
        for i in 0..rows {
            if i != r {
                let factor = a.get(i, c);
                if factor != 0.0 {
                    for j in 0..cols {
                        let v = a.get(i, j) - factor * a.get(r, j);
                        a.set(i, j, v);
                    }
                }
            }
        }
        pivot_cols.push(c);
        pivots.push(mag);
        r += 1;
    }
    Echelon {
        rref: a,
        pivot_cols,
        pivots,
    }
}

/// Solves a square system by partial pivoting. `None` when singular to `tol`.
pub fn solve_square(a: &Matrix, b: &[f64], tol: f64) -> Option<Vec<f64>> {
    let n = a.rows();
    assert_eq!(n, a.cols());
    let mut aug = Matrix::zeros(n, n + 1);
    for i in 0..n {
        for j in 0..n {
            aug.set(i, j, a.get(i, j));
        }
        aug.set(i, n, b[i]);
    }
    let e = echelon(&aug, tol);
    if e.pivot_cols.len() < n || e.pivot_cols.iter().take(n).enumerate().any(|(i, &c)| c != i) {
        return None;
    }
    Some((0..n).map(|i| e.rref.get(i, n)).collect())
}

/// Gram-Schmidt with re-orthogonalization; vectors that become smaller than
/// `tol` are dropped. Each output vector has its first nonzero entry positive.
pub fn orthonormalize(vectors: &[Vec<f64>], tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(&w, q);
                axpy(&mut w, -c, q);
            }
        }
        let n = norm2(&w);
        if n > tol {
            let mut q = scale(&w, 1.0 / n);
            canonical_sign(&mut q);
            out.push(q);
        }
    }
    out
}

/// Flips `v` so that its first entry of non-negligible magnitude is positive.
pub fn canonical_sign(v: &mut [f64]) {
    let m = norm_inf(v);
    if let Some(first) = v.iter().find(|x| x.abs() > 1e-12 * m) {
        if *first < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}
