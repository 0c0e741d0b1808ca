//! Compressed sparse row matrices and a Jacobi-preconditioned conjugate
//! gradient solver.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("conjugate gradient did not reach tolerance: relative residual {residual:e} after {iterations} iterations")]
    Diverged { iterations: usize, residual: f64 },
    #[error("dimension mismatch: matrix is {rows}x{rows}, vector has {len}")]
    DimensionMismatch { rows: usize, len: usize },
    #[error("matrix is not positive definite (p'Ap = {0:e})")]
    NotPositiveDefinite(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Square matrix from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(u32, u32, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(u32, u32)> = None;
        for (r, c, v) in triplets {
            assert!((r as usize) < n && (c as usize) < n, "triplet ({r}, {c}) outside {n}x{n}");
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r as usize + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Self { n, row_ptr, cols, vals }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut t = Vec::new();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), n, "dense input must be square");
            for (j, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    t.push((i as u32, j as u32, v));
                }
            }
        }
        Self::from_triplets(n, t)
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, (0..n as u32).map(|i| (i, i, 1.0)).collect())
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self::from_triplets(d.len(), d.iter().enumerate().map(|(i, &v)| (i as u32, i as u32, v)).collect())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()].iter().map(|&c| c as usize).zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&(j as u32)) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn total(&self) -> f64 {
        self.vals.iter().sum()
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k] as usize];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    /// `self + s * diag(d)`; the diagonal must already be in the pattern.
    pub fn plus_scaled_diagonal(&self, d: &[f64], s: f64) -> Self {
        let mut out = self.clone();
        for i in 0..self.n {
            let span = out.row_ptr[i]..out.row_ptr[i + 1];
            let k = out.cols[span.clone()]
                .binary_search(&(i as u32))
                .expect("diagonal entry missing from sparsity pattern");
            out.vals[span.start + k] += s * d[i];
        }
        out
    }

    /// Largest `|A_ij - A_ji|` relative to the largest `|A_ij|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    /// Principal submatrix on the rows/columns with `keep[i]`, plus the map
    /// from reduced index to original index.
    pub fn principal_submatrix(&self, keep: &[bool]) -> (Self, Vec<usize>) {
        let mut new_index = vec![u32::MAX; self.n];
        let mut map = Vec::new();
        for (i, &k) in keep.iter().enumerate() {
            if k {
                new_index[i] = map.len() as u32;
                map.push(i);
            }
        }
        let mut row_ptr = Vec::with_capacity(map.len() + 1);
        row_ptr.push(0);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        for &i in &map {
            for (j, v) in self.row(i) {
                let nj = new_index[j];
                if nj != u32::MAX {
                    cols.push(nj);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        (Self { n: map.len(), row_ptr, cols, vals }, map)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A` to relative residual
/// `‖b − Ax‖ / ‖b‖ ≤ tol`, starting from `x0` (zero if `None`).
pub fn conjugate_gradient(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, CgReport), SolveError> {
    let n = a.dim();
    if b.len() != n {
        return Err(SolveError::DimensionMismatch { rows: n, len: b.len() });
    }
    let mut x = match x0 {
        Some(x0) if x0.len() == n => x0.to_vec(),
        Some(x0) => return Err(SolveError::DimensionMismatch { rows: n, len: x0.len() }),
        None => vec![0.0; n],
    };
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok((vec![0.0; n], CgReport { iterations: 0, relative_residual: 0.0 }));
    }
    let inv_diag: Vec<f64> = a.diag().iter().map(|&d| if d > 0.0 { 1.0 / d } else { 1.0 }).collect();

    let mut r = a.mul_vec(&x);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut rel = dot(&r, &r).sqrt() / b_norm;
    if rel <= tol {
        return Ok((x, CgReport { iterations: 0, relative_residual: rel }));
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(SolveError::NotPositiveDefinite(pap));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = dot(&r, &r).sqrt() / b_norm;
        if rel <= tol {
            return Ok((x, CgReport { iterations: it, relative_residual: rel }));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(SolveError::Diverged { iterations: max_iter, residual: rel })
}
