//! Compressed sparse row storage.

use serde::{Deserialize, Serialize};

use super::DenseMatrix;
use crate::{Error, Result};

/// Row-major compressed sparse matrix.
///
/// Invariants (checked by [`SparseMatrix::new`]):
/// `row_offsets` is non-decreasing, starts at 0 and ends at `nnz`; column
/// indices are strictly increasing within a row and `< n_cols`; no explicit
/// zeros are stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(Error::InvalidArgument(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(Error::InvalidArgument("row_offsets[0] must be 0".into()));
        }
        if col_indices.len() != values.len() || row_offsets[n_rows] != values.len() {
            return Err(Error::InvalidArgument(format!(
                "nnz mismatch: offsets end at {}, {} indices, {} values",
                row_offsets[n_rows],
                col_indices.len(),
                values.len()
            )));
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(Error::InvalidArgument(format!(
                    "row_offsets decreases at row {i}"
                )));
            }
            let cols = &col_indices[lo..hi];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "column indices of row {i} are not strictly increasing"
                )));
            }
            if let Some(&c) = cols.last() {
                if c >= n_cols {
                    return Err(Error::InvalidArgument(format!(
                        "column index {c} out of range in row {i} (n_cols = {n_cols})"
                    )));
                }
            }
        }
        if let Some(pos) = values.iter().position(|&v| v == 0.0) {
            return Err(Error::InvalidArgument(format!(
                "explicit zero stored at position {pos}"
            )));
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    /// Builds from (row, col, value) triplets. Duplicates are summed and
    /// zeros dropped.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut sorted = triplets.to_vec();
        sorted.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_offsets = vec![0usize; n_rows + 1];
        let mut col_indices = Vec::with_capacity(sorted.len());
        let mut values: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut rows = Vec::with_capacity(sorted.len());
        for (r, c, v) in sorted {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidArgument(format!(
                    "triplet ({r}, {c}) outside {n_rows}x{n_cols}"
                )));
            }
            if rows.last() == Some(&r) && col_indices.last() == Some(&c) {
                *values.last_mut().unwrap() += v;
            } else {
                rows.push(r);
                col_indices.push(c);
                values.push(v);
            }
        }
        let mut keep_cols = Vec::with_capacity(values.len());
        let mut keep_vals = Vec::with_capacity(values.len());
        for ((r, c), v) in rows.into_iter().zip(col_indices).zip(values) {
            if v != 0.0 {
                row_offsets[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for i in 0..n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        Self::new(n_rows, n_cols, row_offsets, keep_cols, keep_vals)
    }

    pub fn from_dense(dense: &DenseMatrix) -> Self {
        let mut row_offsets = Vec::with_capacity(dense.n_rows() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..dense.n_rows() {
            for (j, &v) in dense.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(values.len());
        }
        Self {
            n_rows: dense.n_rows(),
            n_cols: dense.n_cols(),
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_offsets[i], self.row_offsets[i + 1]);
        (&self.col_indices[lo..hi], &self.values[lo..hi])
    }

    pub fn density(&self) -> f64 {
        if self.n_rows == 0 || self.n_cols == 0 {
            return 0.0;
        }
        self.nnz() as f64 / (self.n_rows as f64 * self.n_cols as f64)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            let row = out.row_mut(i);
            for (&c, &v) in cols.iter().zip(vals) {
                row[c] = v;
            }
        }
        out
    }

    /// Transpose, i.e. the compressed-column form of `self` re-read as rows.
    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.col_indices {
            counts[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            counts[j + 1] += counts[j];
        }
        let row_offsets = counts.clone();
        let mut next = counts;
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            let (cols, vals) = self.row(i);
            for (&c, &v) in cols.iter().zip(vals) {
                let dst = next[c];
                col_indices[dst] = i;
                values[dst] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> SparseMatrix {
        let mut row_offsets = Vec::with_capacity(rows.len() + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for &i in rows {
            let (cols, vals) = self.row(i);
            col_indices.extend_from_slice(cols);
            values.extend_from_slice(vals);
            row_offsets.push(values.len());
        }
        SparseMatrix {
            n_rows: rows.len(),
            n_cols: self.n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    /// Multiplies column `j` by `scales[j]`; columns scaled to zero lose
    /// their entries.
    pub fn scale_columns(&mut self, scales: &[f64]) {
        for (c, v) in self.col_indices.iter().zip(self.values.iter_mut()) {
            *v *= scales[*c];
        }
        if scales.contains(&0.0) {
            let triplets: Vec<_> = (0..self.n_rows)
                .flat_map(|i| {
                    let (cols, vals) = self.row(i);
                    cols.iter()
                        .zip(vals)
                        .map(move |(&c, &v)| (i, c, v))
                        .collect::<Vec<_>>()
                })
                .collect();
            *self = SparseMatrix::from_triplets(self.n_rows, self.n_cols, &triplets)
                .expect("rescaled matrix stays well formed");
        }
    }

    pub fn set_n_cols(&mut self, n_cols: usize) -> Result<()> {
        if self.col_indices.iter().any(|&c| c >= n_cols) {
            return Err(Error::InvalidArgument(format!(
                "cannot shrink to {n_cols} columns: larger indices are present"
            )));
        }
        self.n_cols = n_cols;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_broken_invariants() {
        assert!(SparseMatrix::new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(1, 3, vec![0, 1], vec![3], vec![1.0]).is_err());
        assert!(SparseMatrix::new(1, 3, vec![0, 1], vec![0], vec![0.0]).is_err());
        assert!(SparseMatrix::new(2, 3, vec![0, 2, 1], vec![0, 1], vec![1.0, 1.0]).is_err());
        assert!(SparseMatrix::new(1, 3, vec![1, 1], vec![], vec![]).is_err());
        assert!(SparseMatrix::new(2, 3, vec![0, 1, 2], vec![0, 2], vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn triplets_merge_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(
            2,
            3,
            &[(1, 2, 1.0), (0, 1, 2.0), (1, 2, -1.0), (0, 0, 3.0)],
        )
        .unwrap();
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.row(0), (&[0usize, 1][..], &[3.0, 2.0][..]));
        assert_eq!(m.row(1).0.len(), 0);
    }

    #[test]
    fn transpose_twice_is_identity() {
        let m = SparseMatrix::from_triplets(3, 4, &[(0, 3, 1.0), (2, 0, -2.0), (1, 1, 5.0), (2, 3, 4.0)])
            .unwrap();
        let t = m.transpose();
        assert_eq!(t.n_rows(), 4);
        assert_eq!(t.to_dense().get(3, 2), 4.0);
        assert_eq!(t.transpose(), m);
    }
}
