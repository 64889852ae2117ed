//! Random projections `S: ℝⁿ → ℝᵐ` and their application to data matrices.
//!
//! Four families are supported:
//!
//! - **Gaussian**: `S = G / √m` with iid `N(0, 1)` entries in `G`.
//! - **SRHT**: `S = √(n_pad/m) · P · (H/√n_pad) · D`, where `D` flips signs,
//!   `H` is the Walsh–Hadamard transform on the zero-padded length
//!   `n_pad = 2^⌈log₂ n⌉` and `P` samples `m` rows uniformly with replacement.
//! - **CountSketch**: column `i` has a single `±1` in row `h(i)`.
//! - **SJLT**: `s` stacked CountSketch blocks of `m/s` rows each, scaled by
//!   `1/√s`.
//!
//! An `Identity` family (the full-dimension sketch `S = I`) is provided for
//! exactness checks and as the "Exact" baseline.
//!
//! CountSketch and SJLT are applied by streaming over the stored entries of
//! `A`, so their cost is `O(s · nnz(A))`. All kernels may run on the current
//! rayon pool; the output is bitwise independent of the number of threads
//! because work is split by output column and every output entry is
//! accumulated in row order.

pub mod diagnostics;
mod fwht;

pub use diagnostics::{
    diagnose_lemmas, empirical_sketch_error, estimate_z1_z2, sketch_error_trials,
    subspace_distortion, Distortion, LemmaReport,
};
pub use fwht::{fwht, hadamard_entry};

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, DenseMatrix, SparseMatrix};
use crate::rng::{mix_seed, rng_from_seed};
use crate::{Error, Result};

/// Upper bound on the number of entries of a materialised Gaussian sketch.
const MAX_GAUSSIAN_ENTRIES: usize = 1 << 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SketchFamily {
    Gaussian,
    Srht,
    CountSketch,
    Sjlt,
    Identity,
}

impl SketchFamily {
    pub const RANDOM: [SketchFamily; 4] = [
        SketchFamily::Gaussian,
        SketchFamily::Srht,
        SketchFamily::CountSketch,
        SketchFamily::Sjlt,
    ];
}

impl fmt::Display for SketchFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SketchFamily::Gaussian => "Gaussian",
            SketchFamily::Srht => "SRHT",
            SketchFamily::CountSketch => "CountSketch",
            SketchFamily::Sjlt => "SJLT",
            SketchFamily::Identity => "Exact",
        })
    }
}

impl FromStr for SketchFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "gaussian" | "gauss" => Ok(SketchFamily::Gaussian),
            "srht" => Ok(SketchFamily::Srht),
            "countsketch" | "cs" => Ok(SketchFamily::CountSketch),
            "sjlt" => Ok(SketchFamily::Sjlt),
            "identity" | "exact" => Ok(SketchFamily::Identity),
            _ => Err(Error::InvalidArgument(format!("unknown sketch family {s:?}"))),
        }
    }
}

/// Declarative sketch configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchSpec {
    pub family: SketchFamily,
    /// Projection dimension.
    pub m: usize,
    /// Column sparsity; only meaningful for SJLT, 1 otherwise.
    pub s: usize,
    pub seed: u64,
}

impl SketchSpec {
    pub fn new(family: SketchFamily, m: usize, seed: u64) -> Self {
        Self {
            family,
            m,
            s: 1,
            seed,
        }
    }

    pub fn sjlt(m: usize, s: usize, seed: u64) -> Self {
        Self {
            family: SketchFamily::Sjlt,
            m,
            s,
            seed,
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidArgument("projection dimension must be >= 1".into()));
        }
        match self.family {
            SketchFamily::Sjlt => {
                if self.s < 1 || self.s > self.m || !self.m.is_multiple_of(self.s) {
                    return Err(Error::InvalidArgument(format!(
                        "SJLT needs 1 <= s <= m with s dividing m, got m={} s={}",
                        self.m, self.s
                    )));
                }
            }
            _ if self.s != 1 => {
                return Err(Error::InvalidArgument(format!(
                    "column sparsity s={} only applies to SJLT",
                    self.s
                )))
            }
            _ => {}
        }
        Ok(())
    }
}

/// One CountSketch block: row `buckets[i]`, sign `signs[i]` for column `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct HashBlock {
    buckets: Vec<usize>,
    signs: Vec<f64>,
}

impl HashBlock {
    fn random(n: usize, rows: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let mut buckets = Vec::with_capacity(n);
        let mut signs = Vec::with_capacity(n);
        for _ in 0..n {
            buckets.push(rng.random_range(0..rows));
            signs.push(if rng.random::<bool>() { 1.0 } else { -1.0 });
        }
        Self { buckets, signs }
    }

    pub fn buckets(&self) -> &[usize] {
        &self.buckets
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Realization {
    /// Column `i` of `S` stored contiguously at `columns[i*m..(i+1)*m]`,
    /// already scaled by `1/√m`.
    Gaussian { columns: Vec<f64> },
    Srht {
        n_pad: usize,
        signs: Vec<f64>,
        rows: Vec<usize>,
    },
    Hashed {
        blocks: Vec<HashBlock>,
        block_rows: usize,
        scale: f64,
    },
}

/// A realised random projection.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchOperator {
    family: SketchFamily,
    m: usize,
    n: usize,
    real: Realization,
}

/// Deterministic realisation of `spec` for inputs of length `n`.
///
/// SJLT block `k` draws from the child seed `mix_seed(spec.seed, k)`;
/// CountSketch uses block 0 of the same scheme, so an SJLT with `s = 1`
/// reproduces the CountSketch with the same seed exactly.
pub fn build_sketch(spec: &SketchSpec, n: usize) -> Result<SketchOperator> {
    spec.validate()?;
    if n < 1 {
        return Err(Error::InvalidArgument("sketch input dimension must be >= 1".into()));
    }
    let m = spec.m;
    let real = match spec.family {
        SketchFamily::Gaussian => {
            if m.saturating_mul(n) > MAX_GAUSSIAN_ENTRIES {
                return Err(Error::InvalidArgument(format!(
                    "Gaussian sketch of {m}x{n} exceeds {MAX_GAUSSIAN_ENTRIES} entries"
                )));
            }
            let mut rng = rng_from_seed(spec.seed);
            let scale = 1.0 / (m as f64).sqrt();
            let columns = (0..m * n)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
                .collect();
            Realization::Gaussian { columns }
        }
        SketchFamily::Srht => {
            let n_pad = n.next_power_of_two();
            if m > n_pad {
                return Err(Error::InvalidArgument(format!(
                    "SRHT projection dimension {m} exceeds padded length {n_pad}"
                )));
            }
            let mut rng = rng_from_seed(spec.seed);
            let signs = (0..n)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect();
            let rows = (0..m).map(|_| rng.random_range(0..n_pad)).collect();
            Realization::Srht { n_pad, signs, rows }
        }
        SketchFamily::CountSketch | SketchFamily::Sjlt => {
            if m > n {
                log::warn!("sparse sketch with m = {m} > n = {n} does not reduce dimension");
            }
            let s = spec.s;
            let block_rows = m / s;
            let blocks = (0..s)
                .map(|k| HashBlock::random(n, block_rows, mix_seed(spec.seed, k as u64)))
                .collect();
            Realization::Hashed {
                blocks,
                block_rows,
                scale: 1.0 / (s as f64).sqrt(),
            }
        }
        SketchFamily::Identity => {
            if m != n {
                return Err(Error::InvalidArgument(format!(
                    "identity sketch needs m = n, got m={m} n={n}"
                )));
            }
            return Ok(SketchOperator::identity(n));
        }
    };
    Ok(SketchOperator {
        family: spec.family,
        m,
        n,
        real,
    })
}

impl SketchOperator {
    /// `S = I_n`, represented as a CountSketch with injective buckets.
    pub fn identity(n: usize) -> Self {
        SketchOperator {
            family: SketchFamily::Identity,
            m: n,
            n,
            real: Realization::Hashed {
                blocks: vec![HashBlock {
                    buckets: (0..n).collect(),
                    signs: vec![1.0; n],
                }],
                block_rows: n,
                scale: 1.0,
            },
        }
    }

    /// CountSketch with explicitly chosen buckets and signs.
    pub fn count_sketch_from_parts(m: usize, buckets: Vec<usize>, signs: Vec<f64>) -> Result<Self> {
        if buckets.len() != signs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} buckets but {} signs",
                buckets.len(),
                signs.len()
            )));
        }
        if buckets.iter().any(|&b| b >= m) {
            return Err(Error::InvalidArgument(format!("bucket outside [0, {m})")));
        }
        if signs.iter().any(|&s| s != 1.0 && s != -1.0) {
            return Err(Error::InvalidArgument("signs must be +1 or -1".into()));
        }
        Ok(SketchOperator {
            family: SketchFamily::CountSketch,
            m,
            n: buckets.len(),
            real: Realization::Hashed {
                blocks: vec![HashBlock { buckets, signs }],
                block_rows: m,
                scale: 1.0,
            },
        })
    }

    pub fn family(&self) -> SketchFamily {
        self.family
    }

    /// Output dimension.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Input dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Hash blocks of a CountSketch/SJLT/identity operator.
    pub fn hash_blocks(&self) -> Option<&[HashBlock]> {
        match &self.real {
            Realization::Hashed { blocks, .. } => Some(blocks),
            _ => None,
        }
    }

    /// Padded length of an SRHT operator.
    pub fn padded_len(&self) -> Option<usize> {
        match &self.real {
            Realization::Srht { n_pad, .. } => Some(*n_pad),
            _ => None,
        }
    }

    /// Dense `m x n` materialisation. Intended for tests and diagnostics on
    /// small inputs.
    pub fn densify(&self) -> DenseMatrix {
        let (m, n) = (self.m, self.n);
        let mut out = DenseMatrix::zeros(m, n);
        match &self.real {
            Realization::Gaussian { columns } => {
                for i in 0..n {
                    for k in 0..m {
                        out.set(k, i, columns[i * m + k]);
                    }
                }
            }
            Realization::Srht { signs, rows, .. } => {
                let scale = 1.0 / (m as f64).sqrt();
                for (k, &r) in rows.iter().enumerate() {
                    for (i, &d) in signs.iter().enumerate() {
                        out.set(k, i, scale * d * hadamard_entry(r, i));
                    }
                }
            }
            Realization::Hashed {
                blocks,
                block_rows,
                scale,
            } => {
                for (kb, block) in blocks.iter().enumerate() {
                    for i in 0..n {
                        out.set(kb * block_rows + block.buckets[i], i, block.signs[i] * scale);
                    }
                }
            }
        }
        out
    }

    /// Explicit nonzero pattern of `S` as an `m x n` sparse matrix.
    pub fn to_sparse(&self) -> SparseMatrix {
        match &self.real {
            Realization::Hashed {
                blocks,
                block_rows,
                scale,
            } => {
                let triplets: Vec<_> = blocks
                    .iter()
                    .enumerate()
                    .flat_map(|(kb, b)| {
                        (0..self.n).map(move |i| (kb * block_rows + b.buckets[i], i, b.signs[i] * scale))
                    })
                    .collect();
                SparseMatrix::from_triplets(self.m, self.n, &triplets)
                    .expect("hash sketch entries are in range")
            }
            _ => SparseMatrix::from_dense(&self.densify()),
        }
    }
}

/// `S A` as a dense `m x d` matrix.
pub fn apply_sketch(s: &SketchOperator, a: &DataMatrix) -> Result<DenseMatrix> {
    if a.n_rows() != s.n {
        return Err(Error::DimensionMismatch(format!(
            "sketch expects {} rows, matrix has {}",
            s.n,
            a.n_rows()
        )));
    }
    Ok(match &s.real {
        Realization::Gaussian { columns } => apply_gaussian(columns, s.m, a),
        Realization::Srht { n_pad, signs, rows } => apply_srht(*n_pad, signs, rows, s.m, a),
        Realization::Hashed {
            blocks,
            block_rows,
            scale,
        } => apply_hashed(blocks, *block_rows, *scale, s.m, a),
    })
}

/// `S v`.
pub fn sketch_vector(s: &SketchOperator, v: &[f64]) -> Result<Vec<f64>> {
    let col = DenseMatrix::new(v.len(), 1, v.to_vec())?;
    Ok(apply_sketch(s, &DataMatrix::Dense(col))?.into_values())
}

fn column_ranges(d: usize) -> Vec<Range<usize>> {
    let parts = rayon::current_num_threads().clamp(1, d.max(1));
    let chunk = d.div_ceil(parts).max(1);
    (0..d).step_by(chunk).map(|c0| c0..(c0 + chunk).min(d)).collect()
}

/// Runs `kernel` on each column range of the output and stitches the
/// `m x width` blocks together.
fn by_column_blocks<F>(m: usize, d: usize, kernel: F) -> DenseMatrix
where
    F: Fn(Range<usize>) -> Vec<f64> + Sync,
{
    let ranges = column_ranges(d);
    if ranges.len() <= 1 {
        return DenseMatrix::new(m, d, kernel(0..d)).expect("kernel output has m*d entries");
    }
    let blocks: Vec<Vec<f64>> = ranges.par_iter().cloned().map(&kernel).collect();
    let mut out = DenseMatrix::zeros(m, d);
    for (range, block) in ranges.iter().zip(&blocks) {
        let w = range.len();
        for k in 0..m {
            out.row_mut(k)[range.clone()].copy_from_slice(&block[k * w..(k + 1) * w]);
        }
    }
    out
}

#[inline]
fn sparse_segment<'a>(
    cols: &'a [usize],
    vals: &'a [f64],
    range: &Range<usize>,
    full: bool,
) -> (&'a [usize], &'a [f64]) {
    if full {
        return (cols, vals);
    }
    let lo = cols.partition_point(|&c| c < range.start);
    let hi = lo + cols[lo..].partition_point(|&c| c < range.end);
    (&cols[lo..hi], &vals[lo..hi])
}

fn apply_hashed(blocks: &[HashBlock], block_rows: usize, scale: f64, m: usize, a: &DataMatrix) -> DenseMatrix {
    let d = a.n_cols();
    by_column_blocks(m, d, |range| {
        let w = range.len();
        let full = w == d;
        let mut out = vec![0.0; m * w];
        match a {
            DataMatrix::Sparse(sp) => {
                for i in 0..sp.n_rows() {
                    let (cols, vals) = sp.row(i);
                    let (cols, vals) = sparse_segment(cols, vals, &range, full);
                    if cols.is_empty() {
                        continue;
                    }
                    for (kb, block) in blocks.iter().enumerate() {
                        let r = kb * block_rows + block.buckets[i];
                        let coef = block.signs[i] * scale;
                        let dst = &mut out[r * w..(r + 1) * w];
                        for (&c, &v) in cols.iter().zip(vals) {
                            dst[c - range.start] += coef * v;
                        }
                    }
                }
            }
            DataMatrix::Dense(dn) => {
                for i in 0..dn.n_rows() {
                    let src = &dn.row(i)[range.clone()];
                    for (kb, block) in blocks.iter().enumerate() {
                        let r = kb * block_rows + block.buckets[i];
                        let coef = block.signs[i] * scale;
                        for (o, &v) in out[r * w..(r + 1) * w].iter_mut().zip(src) {
                            *o += coef * v;
                        }
                    }
                }
            }
        }
        out
    })
}

fn apply_gaussian(columns: &[f64], m: usize, a: &DataMatrix) -> DenseMatrix {
    let d = a.n_cols();
    by_column_blocks(m, d, |range| {
        let w = range.len();
        let full = w == d;
        // accumulate the transpose so each update is a contiguous axpy of length m
        let mut acc = vec![0.0; w * m];
        let mut axpy = |c: usize, v: f64, g: &[f64]| {
            let dst = &mut acc[(c - range.start) * m..(c - range.start + 1) * m];
            for (o, &gk) in dst.iter_mut().zip(g) {
                *o += v * gk;
            }
        };
        match a {
            DataMatrix::Sparse(sp) => {
                for i in 0..sp.n_rows() {
                    let (cols, vals) = sp.row(i);
                    let (cols, vals) = sparse_segment(cols, vals, &range, full);
                    let g = &columns[i * m..(i + 1) * m];
                    for (&c, &v) in cols.iter().zip(vals) {
                        axpy(c, v, g);
                    }
                }
            }
            DataMatrix::Dense(dn) => {
                for i in 0..dn.n_rows() {
                    let g = &columns[i * m..(i + 1) * m];
                    for (c, &v) in dn.row(i)[range.clone()].iter().enumerate() {
                        if v != 0.0 {
                            axpy(c + range.start, v, g);
                        }
                    }
                }
            }
        }
        let mut out = vec![0.0; m * w];
        for jj in 0..w {
            for k in 0..m {
                out[k * w + jj] = acc[jj * m + k];
            }
        }
        out
    })
}

fn apply_srht(n_pad: usize, signs: &[f64], rows: &[usize], m: usize, a: &DataMatrix) -> DenseMatrix {
    let d = a.n_cols();
    let scale = 1.0 / (m as f64).sqrt();
    let transposed = match a {
        DataMatrix::Sparse(sp) => Some(sp.transpose()),
        DataMatrix::Dense(_) => None,
    };
    let column = |j: usize| -> Vec<f64> {
        let mut buf = vec![0.0; n_pad];
        match (a, &transposed) {
            (DataMatrix::Sparse(_), Some(t)) => {
                let (idx, vals) = t.row(j);
                for (&i, &v) in idx.iter().zip(vals) {
                    buf[i] = signs[i] * v;
                }
            }
            (DataMatrix::Dense(dn), _) => {
                for (i, b) in buf.iter_mut().take(dn.n_rows()).enumerate() {
                    *b = signs[i] * dn.get(i, j);
                }
            }
            _ => unreachable!(),
        }
        fwht(&mut buf);
        rows.iter().map(|&r| buf[r] * scale).collect()
    };
    let cols: Vec<Vec<f64>> = if rayon::current_num_threads() > 1 {
        (0..d).into_par_iter().map(column).collect()
    } else {
        (0..d).map(column).collect()
    };
    let mut out = DenseMatrix::zeros(m, d);
    for (j, col) in cols.iter().enumerate() {
        for (k, &v) in col.iter().enumerate() {
            out.set(k, j, v);
        }
    }
    out
}

#[cfg(test)]
mod tests;
