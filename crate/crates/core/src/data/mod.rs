//! Matrix storage, dataset ingestion and synthetic instance generation.

mod dense;
mod io;
mod sparse;
mod synthetic;

pub use dense::DenseMatrix;
pub use io::{load_csv, load_svmlight, write_svmlight, SvmlightOptions};
pub(crate) use io::write_svmlight_to;
pub use sparse::SparseMatrix;
pub use synthetic::{generate_gaussian_design, GaussianDesignSpec};

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::rng::rng_from_seed;
use crate::{Error, Result};

/// The data matrix `A` of a least-squares instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataMatrix {
    Sparse(SparseMatrix),
    Dense(DenseMatrix),
}

impl From<SparseMatrix> for DataMatrix {
    fn from(m: SparseMatrix) -> Self {
        DataMatrix::Sparse(m)
    }
}

impl From<DenseMatrix> for DataMatrix {
    fn from(m: DenseMatrix) -> Self {
        DataMatrix::Dense(m)
    }
}

impl DataMatrix {
    pub fn n_rows(&self) -> usize {
        match self {
            DataMatrix::Sparse(m) => m.n_rows(),
            DataMatrix::Dense(m) => m.n_rows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            DataMatrix::Sparse(m) => m.n_cols(),
            DataMatrix::Dense(m) => m.n_cols(),
        }
    }

    /// Stored entries; for dense storage every nonzero entry.
    pub fn nnz(&self) -> usize {
        match self {
            DataMatrix::Sparse(m) => m.nnz(),
            DataMatrix::Dense(m) => m.values().iter().filter(|&&v| v != 0.0).count(),
        }
    }

    pub fn density(&self) -> f64 {
        let cells = self.n_rows() as f64 * self.n_cols() as f64;
        if cells == 0.0 {
            0.0
        } else {
            self.nnz() as f64 / cells
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            DataMatrix::Sparse(m) => m.to_dense(),
            DataMatrix::Dense(m) => m.clone(),
        }
    }

    /// Exact `A x`; the sparse path touches each stored entry once.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols() {
            return Err(Error::DimensionMismatch(format!(
                "matvec: matrix has {} columns, vector has length {}",
                self.n_cols(),
                x.len()
            )));
        }
        Ok(match self {
            DataMatrix::Sparse(m) => (0..m.n_rows())
                .map(|i| {
                    let (cols, vals) = m.row(i);
                    cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
                })
                .collect(),
            DataMatrix::Dense(m) => (0..m.n_rows())
                .map(|i| m.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
                .collect(),
        })
    }

    /// Exact `Aᵀ y`.
    pub fn matvec_transpose(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "matvec_transpose: matrix has {} rows, vector has length {}",
                self.n_rows(),
                y.len()
            )));
        }
        let mut out = vec![0.0; self.n_cols()];
        match self {
            DataMatrix::Sparse(m) => {
                for (i, &yi) in y.iter().enumerate() {
                    let (cols, vals) = m.row(i);
                    for (&c, &v) in cols.iter().zip(vals) {
                        out[c] += v * yi;
                    }
                }
            }
            DataMatrix::Dense(m) => {
                for (i, &yi) in y.iter().enumerate() {
                    for (o, &a) in out.iter_mut().zip(m.row(i)) {
                        *o += a * yi;
                    }
                }
            }
        }
        Ok(out)
    }

    /// `AᵀA` in O(nnz·d) for sparse storage, O(nd²) for dense.
    pub fn gram(&self) -> DenseMatrix {
        match self {
            DataMatrix::Dense(m) => m.gram(),
            DataMatrix::Sparse(m) => {
                let d = m.n_cols();
                let mut out = DenseMatrix::zeros(d, d);
                let vals = out.values_mut();
                for i in 0..m.n_rows() {
                    let (cols, v) = m.row(i);
                    for (p, (&cp, &vp)) in cols.iter().zip(v).enumerate() {
                        let dst = &mut vals[cp * d..(cp + 1) * d];
                        for (&cq, &vq) in cols[p..].iter().zip(&v[p..]) {
                            dst[cq] += vp * vq;
                        }
                    }
                }
                out.symmetrize_from_upper();
                out
            }
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> DataMatrix {
        match self {
            DataMatrix::Sparse(m) => DataMatrix::Sparse(m.select_rows(rows)),
            DataMatrix::Dense(m) => DataMatrix::Dense(m.select_rows(rows)),
        }
    }

    /// Column 2-norms.
    pub fn column_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.n_cols()];
        match self {
            DataMatrix::Sparse(m) => {
                for (&c, &v) in m.col_indices().iter().zip(m.values()) {
                    sq[c] += v * v;
                }
            }
            DataMatrix::Dense(m) => {
                for i in 0..m.n_rows() {
                    for (s, &v) in sq.iter_mut().zip(m.row(i)) {
                        *s += v * v;
                    }
                }
            }
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    fn scale_columns(&mut self, scales: &[f64]) {
        match self {
            DataMatrix::Sparse(m) => m.scale_columns(scales),
            DataMatrix::Dense(m) => m.scale_columns(scales),
        }
    }
}

/// A data matrix with its target vector, as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub a: DataMatrix,
    pub b: Vec<f64>,
}

impl Dataset {
    pub fn new(a: impl Into<DataMatrix>, b: Vec<f64>) -> Result<Self> {
        let a = a.into();
        if b.len() != a.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "target has length {}, matrix has {} rows",
                b.len(),
                a.n_rows()
            )));
        }
        Ok(Self { a, b })
    }

    pub fn into_problem(self, constraint: ConstraintSet) -> Result<ProblemInstance> {
        ProblemInstance::new(self.a, self.b, constraint)
    }
}

/// Feasible set (or penalty) of the least-squares problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintSet {
    Unconstrained,
    /// Adds `lambda * ||x||_1` to the objective (LASSO).
    L1Penalty { lambda: f64 },
    L1Ball { radius: f64 },
    L2Ball { radius: f64 },
}

impl ConstraintSet {
    pub fn validate(&self) -> Result<()> {
        let v = match *self {
            ConstraintSet::Unconstrained => return Ok(()),
            ConstraintSet::L1Penalty { lambda } => lambda,
            ConstraintSet::L1Ball { radius } | ConstraintSet::L2Ball { radius } => radius,
        };
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "constraint parameter must be finite and non-negative, got {v}"
            )))
        }
    }

    /// Penalty contribution to the objective at `x` (zero for hard constraints).
    pub fn penalty(&self, x: &[f64]) -> f64 {
        match *self {
            ConstraintSet::L1Penalty { lambda } => lambda * x.iter().map(|v| v.abs()).sum::<f64>(),
            _ => 0.0,
        }
    }
}

/// `min_{x ∈ C} ½‖Ax − b‖²` (plus the penalty for [`ConstraintSet::L1Penalty`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    a: DataMatrix,
    b: Vec<f64>,
    constraint: ConstraintSet,
}

impl ProblemInstance {
    pub fn new(a: impl Into<DataMatrix>, b: Vec<f64>, constraint: ConstraintSet) -> Result<Self> {
        let a = a.into();
        if b.len() != a.n_rows() {
            return Err(Error::DimensionMismatch(format!(
                "target has length {}, matrix has {} rows",
                b.len(),
                a.n_rows()
            )));
        }
        if a.n_rows() < a.n_cols() {
            return Err(Error::InvalidArgument(format!(
                "expected an overconstrained problem, got {}x{}",
                a.n_rows(),
                a.n_cols()
            )));
        }
        constraint.validate()?;
        Ok(Self { a, b, constraint })
    }

    pub fn a(&self) -> &DataMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn constraint(&self) -> ConstraintSet {
        self.constraint
    }

    pub fn n(&self) -> usize {
        self.a.n_rows()
    }

    pub fn d(&self) -> usize {
        self.a.n_cols()
    }

    pub fn into_dataset(self) -> Dataset {
        Dataset {
            a: self.a,
            b: self.b,
        }
    }

    pub fn with_constraint(mut self, constraint: ConstraintSet) -> Result<Self> {
        constraint.validate()?;
        self.constraint = constraint;
        Ok(self)
    }

    /// `½‖Ax − b‖² + penalty(x)`.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let ax = self.a.matvec(x)?;
        let r2: f64 = ax.iter().zip(&self.b).map(|(p, q)| (p - q) * (p - q)).sum();
        Ok(0.5 * r2 + self.constraint.penalty(x))
    }

    /// Rescales columns of `A` to unit 2-norm (all-zero columns untouched);
    /// returns the applied factors.
    pub fn normalize_columns(&mut self) -> Vec<f64> {
        let scales: Vec<f64> = self
            .a
            .column_norms()
            .into_iter()
            .map(|n| if n > 0.0 { 1.0 / n } else { 1.0 })
            .collect();
        self.a.scale_columns(&scales);
        scales
    }

    /// Keeps `2^⌊log2 n⌋` rows drawn uniformly without replacement, so that
    /// SRHT needs no zero padding.
    pub fn subsample_rows_pow2(&self, seed: u64) -> Result<ProblemInstance> {
        let n = self.n();
        let keep = 1usize << (usize::BITS - 1 - n.leading_zeros());
        let mut rng = rng_from_seed(seed);
        let mut rows = sample(&mut rng, n, keep).into_vec();
        rows.sort_unstable();
        let b = rows.iter().map(|&i| self.b[i]).collect();
        ProblemInstance::new(self.a.select_rows(&rows), b, self.constraint)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> DataMatrix {
        DataMatrix::Sparse(
            SparseMatrix::from_triplets(2, 3, &[(0, 0, 2.0), (0, 2, 1.0), (1, 1, 4.0)]).unwrap(),
        )
    }

    #[test]
    fn hand_computed_matvec() {
        let a = example();
        assert_eq!(a.matvec(&[1.0, 1.0, 1.0]).unwrap(), vec![3.0, 4.0]);
        assert_eq!(a.matvec_transpose(&[1.0, -1.0]).unwrap(), vec![2.0, -4.0, 1.0]);
        let dense = DataMatrix::Dense(a.to_dense());
        assert_eq!(dense.matvec(&[1.0, 1.0, 1.0]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn identity_matvec() {
        let a = DataMatrix::Sparse(SparseMatrix::identity(4));
        let x = vec![0.5, -2.0, 3.25, 1e-9];
        assert_eq!(a.matvec(&x).unwrap(), x);
        assert_eq!(a.matvec_transpose(&x).unwrap(), x);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = example();
        assert!(matches!(a.matvec(&[1.0]), Err(Error::DimensionMismatch(_))));
        assert!(matches!(a.matvec_transpose(&[1.0]), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn sparse_gram_matches_dense() {
        let a = example();
        let g = a.gram();
        let dg = a.to_dense().gram();
        assert!(g.max_abs_diff(&dg) == 0.0);
    }

    #[test]
    fn problem_rejects_underdetermined() {
        let a = DenseMatrix::zeros(2, 3);
        assert!(ProblemInstance::new(a, vec![0.0; 2], ConstraintSet::Unconstrained).is_err());
    }

    #[test]
    fn constraint_validation() {
        assert!(ConstraintSet::L1Penalty { lambda: -1.0 }.validate().is_err());
        assert!(ConstraintSet::L2Ball { radius: f64::NAN }.validate().is_err());
        assert!(ConstraintSet::L1Ball { radius: 0.0 }.validate().is_ok());
    }

    #[test]
    fn pow2_subsample_size() {
        let a = DenseMatrix::from_rows(&(0..13).map(|i| vec![i as f64 + 1.0]).collect::<Vec<_>>());
        let p = ProblemInstance::new(a, (0..13).map(|i| i as f64).collect(), ConstraintSet::Unconstrained)
            .unwrap();
        let s = p.subsample_rows_pow2(3).unwrap();
        assert_eq!(s.n(), 8);
        // rows stay paired with their targets
        for i in 0..8 {
            let DataMatrix::Dense(m) = s.a() else { unreachable!() };
            assert_eq!(m.get(i, 0), s.b()[i] + 1.0);
        }
    }

    #[test]
    fn normalize_columns_gives_unit_norms() {
        let a = DenseMatrix::from_rows(&[vec![3.0, 0.0], vec![4.0, 0.0], vec![0.0, 0.0]]);
        let mut p = ProblemInstance::new(a, vec![0.0; 3], ConstraintSet::Unconstrained).unwrap();
        let scales = p.normalize_columns();
        assert_eq!(scales, vec![0.2, 1.0]);
        assert!((p.a().column_norms()[0] - 1.0).abs() < 1e-15);
    }
}
