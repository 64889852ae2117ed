//! Small dense kernels shared by the solver and the diagnostics.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::data::DenseMatrix;
use crate::{Error, Result};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// `H x` for square row-major `H`.
pub fn symv(h: &DenseMatrix, x: &[f64]) -> Vec<f64> {
    (0..h.n_rows()).map(|i| dot(h.row(i), x)).collect()
}

/// Lower-triangular Cholesky factor `L` with `H = L Lᵀ`, stored row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Fails with [`Error::Indefinite`] when a pivot is not strictly positive
    /// or falls below `rel_pivot_tol * max(diag(H))`.
    pub fn factor(h: &DenseMatrix, rel_pivot_tol: f64) -> Result<Self> {
        let n = h.n_rows();
        if h.n_cols() != n {
            return Err(Error::DimensionMismatch(format!(
                "cholesky of a {}x{} matrix",
                n,
                h.n_cols()
            )));
        }
        let max_diag = (0..n).map(|i| h.get(i, i)).fold(0.0, f64::max);
        let floor = rel_pivot_tol * max_diag;
        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let head = &l[j * n..j * n + j];
            let diag = h.get(j, j) - dot(head, head);
            if !(diag > floor) || !diag.is_finite() {
                return Err(Error::Indefinite(diag));
            }
            let diag = diag.sqrt();
            l[j * n + j] = diag;
            for i in j + 1..n {
                let s = h.get(i, j) - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
                l[i * n + j] = s / diag;
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            y[i] = (y[i] - dot(row, &y[..i])) / self.l[i * n + i];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * x[k];
            }
            x[i] = s / self.l[i * n + i];
        }
        x
    }

    /// Solves `H x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `M L⁻ᵀ` for an `m x n` row-major `M`, i.e. each row `r` becomes
    /// `L⁻¹ r`.
    pub fn right_solve_transpose(&self, m: &DenseMatrix) -> DenseMatrix {
        let mut out = m.clone();
        for i in 0..m.n_rows() {
            let solved = self.solve_lower(m.row(i));
            out.row_mut(i).copy_from_slice(&solved);
        }
        out
    }
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn symmetric_eigenvalues(h: &DenseMatrix) -> Vec<f64> {
    let n = h.n_rows();
    let m = DMatrix::from_row_slice(n, n, h.values());
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Largest eigenvalue of a PSD matrix by power iteration from a fixed
/// all-ones start (Rayleigh quotient of the last iterate).
pub fn power_iteration(h: &DenseMatrix, iters: usize) -> f64 {
    let n = h.n_rows();
    if n == 0 {
        return 0.0;
    }
    // slightly uneven start avoids being orthogonal to the top eigenvector
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 1e-3 * (i as f64 + 1.0).sqrt()).collect();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let nv = norm2(&v);
        if nv == 0.0 {
            return 0.0;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        let hv = symv(h, &v);
        lambda = dot(&v, &hv);
        v = hv;
    }
    lambda
}
