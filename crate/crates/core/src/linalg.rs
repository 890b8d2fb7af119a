//! Minimal dense complex matrix support for the recovery path.
//!
//! The matrices involved are small (P ≤ a few dozen rows), so a row-major
//! `Vec` with a modified Gram-Schmidt QR is all that is needed.

use num_complex::Complex64;
use std::ops::{Index, IndexMut};

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Build from a row-major buffer. Panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [Complex64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    pub fn frobenius_norm_sqr(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.frobenius_norm_sqr().sqrt()
    }

    pub fn scale(&self, alpha: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * alpha).collect(),
        }
    }

    /// `self - other`. Panics on shape mismatch.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Matrix product. Panics on inner-dimension mismatch.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(r, k)];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(r).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self[(c, r)].conj())
    }

    /// Copy of the listed columns, in the listed order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self::from_fn(self.rows, cols.len(), |r, c| self[(r, cols[c])])
    }

    /// Copy of the listed rows, in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.cols);
        for &r in rows {
            data.extend_from_slice(self.row(r));
        }
        Self::from_vec(rows.len(), self.cols, data)
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

/// Hermitian inner product `⟨a, b⟩ = Σ conj(a_i) b_i`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Thin QR factorisation `M = Q R` built column by column with modified
/// Gram-Schmidt (re-orthogonalised once).
///
/// Columns are appended incrementally so a greedy solver can grow its
/// support without refactoring from scratch.
#[derive(Debug, Clone)]
pub struct IncrementalQr {
    dim: usize,
    /// Orthonormal columns of Q.
    q: Vec<Vec<Complex64>>,
    /// Upper-triangular R stored column-wise: `r[j][i]` for `i <= j`.
    r: Vec<Vec<Complex64>>,
}

impl IncrementalQr {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            q: Vec::new(),
            r: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// Append a column. Returns `false` (and leaves the factorisation
    /// unchanged) when the column is numerically inside the current span,
    /// judged against `rel_tol` times its own norm.
    pub fn push(&mut self, column: &[Complex64], rel_tol: f64) -> bool {
        assert_eq!(column.len(), self.dim);
        let norm0 = column.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let mut v = column.to_vec();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.q.len()];
        for _pass in 0..2 {
            for (qi, ci) in self.q.iter().zip(coeffs.iter_mut()) {
                let proj = inner(qi, &v);
                *ci += proj;
                for (vk, qk) in v.iter_mut().zip(qi) {
                    *vk -= proj * qk;
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm0 == 0.0 || norm <= rel_tol * norm0 {
            return false;
        }
        for vk in v.iter_mut() {
            *vk /= norm;
        }
        coeffs.push(Complex64::new(norm, 0.0));
        self.q.push(v);
        self.r.push(coeffs);
        true
    }

    /// Least-squares solve `min ‖M Θ − B‖_F` for every column of `b`
    /// (shape `dim × m`). Returns `Θ` with one row per factored column.
    pub fn solve(&self, b: &CMatrix) -> CMatrix {
        assert_eq!(b.rows(), self.dim);
        let k = self.q.len();
        let m = b.cols();
        // Q^H B
        let mut qtb = CMatrix::zeros(k, m);
        for (i, qi) in self.q.iter().enumerate() {
            let out = qtb.row_mut(i);
            for (p, qp) in qi.iter().enumerate() {
                let w = qp.conj();
                for (o, x) in out.iter_mut().zip(b.row(p)) {
                    *o += w * x;
                }
            }
        }
        // back substitution R Θ = Q^H B
        let mut theta = CMatrix::zeros(k, m);
        for i in (0..k).rev() {
            let mut acc = qtb.row(i).to_vec();
            for j in i + 1..k {
                let rij = self.r[j][i];
                for (a, t) in acc.iter_mut().zip(theta.row(j)) {
                    *a -= rij * t;
                }
            }
            let rii = self.r[i][i];
            for (t, a) in theta.row_mut(i).iter_mut().zip(acc) {
                *t = a / rii;
            }
        }
        theta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn matmul_and_adjoint() {
        let a = CMatrix::from_vec(2, 2, vec![c(1.0, 0.0), c(0.0, 1.0), c(2.0, 0.0), c(0.0, 0.0)]);
        let ah = a.adjoint();
        assert_eq!(ah[(0, 1)], c(2.0, 0.0));
        assert_eq!(ah[(1, 0)], c(0.0, -1.0));
        let p = a.matmul(&ah);
        // row0·conj(row0) = 1 + 1
        assert_eq!(p[(0, 0)], c(2.0, 0.0));
    }

    #[test]
    fn qr_solves_exact_system() {
        let m = CMatrix::from_fn(4, 2, |r, col| c((r + 1) as f64, (col * r) as f64));
        let truth = CMatrix::from_vec(2, 3, vec![c(1.0, 2.0), c(0.5, 0.0), c(0.0, -1.0), c(3.0, 0.0), c(-1.0, 1.0), c(0.0, 0.0)]);
        let b = m.matmul(&truth);
        let mut qr = IncrementalQr::new(4);
        assert!(qr.push(&m.column(0), 1e-10));
        assert!(qr.push(&m.column(1), 1e-10));
        let sol = qr.solve(&b);
        assert!(sol.sub(&truth).frobenius_norm() < 1e-12);
    }

    #[test]
    fn qr_rejects_dependent_column() {
        let col = vec![c(1.0, 0.0), c(0.0, 1.0), c(1.0, 1.0)];
        let twice: Vec<_> = col.iter().map(|z| z * c(0.0, 2.0)).collect();
        let mut qr = IncrementalQr::new(3);
        assert!(qr.push(&col, 1e-10));
        assert!(!qr.push(&twice, 1e-10));
        assert_eq!(qr.len(), 1);
    }
}
