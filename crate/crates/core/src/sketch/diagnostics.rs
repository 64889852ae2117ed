//! Embedding-quality measurements.
//!
//! Two independent routes are used in the crate's tests: the quantities here
//! work through the Cholesky factor of `AᵀA` (so `U = A L⁻ᵀ` is never formed),
//! while the test oracles orthonormalise `A` with a QR factorisation and
//! multiply by the materialised operator.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{apply_sketch, build_sketch, sketch_vector, SketchFamily, SketchOperator, SketchSpec};
use crate::data::{DataMatrix, DenseMatrix};
use crate::linalg::{norm2, symmetric_eigenvalues, Cholesky};
use crate::rng::{mix_seed, rng_from_seed};
use crate::{Error, Result};

/// Relative pivot below which `AᵀA` is treated as singular.
const RANK_TOL: f64 = 1e-12;

/// Per-trial values of `‖AᵀSᵀSA − AᵀA‖_F / ‖AᵀA‖_F`; trial `t` uses the
/// seed `mix_seed(spec.seed, t)`.
pub fn sketch_error_trials(a: &DataMatrix, spec: &SketchSpec, trials: usize) -> Result<Vec<f64>> {
    if trials < 1 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let ata = a.gram();
    let norm = ata.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Numerical("AᵀA = 0, relative sketch error undefined".into()));
    }
    (0..trials as u64)
        .map(|t| {
            let s = build_sketch(&spec.with_seed(mix_seed(spec.seed, t)), a.n_rows())?;
            let sa = apply_sketch(&s, a)?;
            Ok(relative_gram_error(&sa, &ata, norm))
        })
        .collect()
}

pub(crate) fn relative_gram_error(sa: &DenseMatrix, ata: &DenseMatrix, ata_norm: f64) -> f64 {
    let h = sa.gram();
    let diff: f64 = h
        .values()
        .iter()
        .zip(ata.values())
        .map(|(p, q)| (p - q) * (p - q))
        .sum();
    diff.sqrt() / ata_norm
}

/// Mean relative Gram-matrix error over `trials` independent sketches.
pub fn empirical_sketch_error(a: &DataMatrix, spec: &SketchSpec, trials: usize) -> Result<f64> {
    let errs = sketch_error_trials(a, spec, trials)?;
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Subspace embedding distortion `(1 − σ²_min(SU), σ²_max(SU) − 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub eps_low: f64,
    pub eps_high: f64,
}

impl Distortion {
    /// Smallest `ε` for which `S` is an `ε`-subspace embedding of col(A).
    pub fn max(&self) -> f64 {
        self.eps_low.max(self.eps_high)
    }
}

struct Embedded {
    chol: Cholesky,
    sa: DenseMatrix,
    /// Ascending eigenvalues of `(SU)ᵀ SU`.
    spectrum: Vec<f64>,
}

fn embed(a: &DataMatrix, s: &SketchOperator) -> Result<Embedded> {
    let chol = Cholesky::factor(&a.gram(), RANK_TOL).map_err(|e| match e {
        Error::Indefinite(_) => Error::RankDeficient,
        other => other,
    })?;
    let sa = apply_sketch(s, a)?;
    let su = chol.right_solve_transpose(&sa);
    let spectrum = symmetric_eigenvalues(&su.gram());
    Ok(Embedded { chol, sa, spectrum })
}

impl Embedded {
    fn distortion(&self) -> Distortion {
        let lo = self.spectrum.first().copied().unwrap_or(1.0);
        let hi = self.spectrum.last().copied().unwrap_or(1.0);
        Distortion {
            eps_low: 1.0 - lo,
            eps_high: hi - 1.0,
        }
    }
}

pub fn subspace_distortion(a: &DataMatrix, s: &SketchOperator) -> Result<Distortion> {
    Ok(embed(a, s)?.distortion())
}

/// `(Z₁, Z₂)` for the unconstrained cone `K = col(A)`:
/// `Z₁ = σ²_min(SU)` and `Z₂ = ‖Uᵀ(SᵀS − I)v‖₂` for a unit vector `v ∈ ℝⁿ`.
pub fn estimate_z1_z2(a: &DataMatrix, s: &SketchOperator, v: &[f64]) -> Result<(f64, f64)> {
    if v.len() != a.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "direction has length {}, matrix has {} rows",
            v.len(),
            a.n_rows()
        )));
    }
    if (norm2(v) - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument("direction v must have unit norm".into()));
    }
    let e = embed(a, s)?;
    // written through eps_low so that z1 == 1 - eps_low holds bit for bit
    let z1 = 1.0 - e.distortion().eps_low;

    let sv = sketch_vector(s, v)?;
    let mut diff = vec![0.0; a.n_cols()];
    for (k, &svk) in sv.iter().enumerate() {
        for (o, &x) in diff.iter_mut().zip(e.sa.row(k)) {
            *o += x * svk;
        }
    }
    for (o, atv) in diff.iter_mut().zip(a.matvec_transpose(v)?) {
        *o -= atv;
    }
    let z2 = norm2(&e.chol.solve_lower(&diff));
    Ok((z1, z2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalRowsCheck {
    pub draws: usize,
    /// Draws where `SSᵀ` had a nonzero off-diagonal entry or a diagonal entry
    /// different from the row's nonzero count.
    pub violations: usize,
    /// Draws where some column did not hold exactly one `±1`.
    pub column_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanDeviationCheck {
    /// Leading principal block of the averaged matrix that was examined.
    pub dim: usize,
    pub max_deviation: f64,
    pub threshold: f64,
}

impl MeanDeviationCheck {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCheck {
    pub epsilon: f64,
    pub frequency: f64,
    pub bound: f64,
    pub slack: f64,
}

impl TailCheck {
    pub fn passed(&self) -> bool {
        self.frequency <= self.bound + self.slack
    }
}

/// Empirical checks of the CountSketch moment and structure lemmas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    /// `SSᵀ` is diagonal with `(SSᵀ)ᵢᵢ = Nᵢ` for every draw.
    pub orthogonal_rows: OrthogonalRowsCheck,
    /// `max |Ê[SᵀS] − I|` against `5/√trials`.
    pub covariance: MeanDeviationCheck,
    /// `max |Ê[SSᵀ] − (n/m) I|` against five binomial standard errors.
    pub row_gram: MeanDeviationCheck,
    /// `P(⟨S₀, u⟩ ≥ ε‖u‖)` against `exp(−ε²/2)` plus three standard errors.
    pub tails: Vec<TailCheck>,
}

impl LemmaReport {
    pub fn all_passed(&self) -> bool {
        self.orthogonal_rows.violations == 0
            && self.orthogonal_rows.column_violations == 0
            && self.covariance.passed()
            && self.row_gram.passed()
            && self.tails.iter().all(TailCheck::passed)
    }
}

/// Largest leading block of `E[SᵀS]` that is averaged explicitly.
const MAX_COVARIANCE_DIM: usize = 512;

pub const TAIL_EPSILONS: [f64; 3] = [0.5, 1.0, 2.0];

/// Monte-Carlo and exact checks of the CountSketch lemmas over `trials`
/// independent draws (draw `t` uses `mix_seed(spec.seed, t)`).
pub fn diagnose_lemmas(spec: &SketchSpec, n: usize, trials: usize) -> Result<LemmaReport> {
    if spec.family != SketchFamily::CountSketch {
        return Err(Error::InvalidArgument(format!(
            "lemma diagnostics are stated for CountSketch, got {}",
            spec.family
        )));
    }
    if trials < 1 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let m = spec.m;
    let dim = n.min(MAX_COVARIANCE_DIM);

    let mut u_rng = rng_from_seed(mix_seed(spec.seed, u64::MAX));
    let u: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut u_rng)).collect();
    let u_norm = norm2(&u);

    let mut violations = 0;
    let mut column_violations = 0;
    let mut cov_sum = vec![0.0; dim * dim];
    let mut row_norm_sum = vec![0.0; m];
    let mut tail_hits = [0usize; TAIL_EPSILONS.len()];

    for t in 0..trials as u64 {
        let s = build_sketch(&spec.with_seed(mix_seed(spec.seed, t)), n)?;
        let sp = s.to_sparse();

        // column structure from the materialised operator
        let st = sp.transpose();
        if (0..n).any(|i| {
            let (_, vals) = st.row(i);
            vals.len() != 1 || vals[0].abs() != 1.0
        }) {
            column_violations += 1;
        }

        // SSᵀ accumulated column by column: Σ_i s_i s_iᵀ
        let mut diag = vec![0.0; m];
        let mut offdiag_nonzero = false;
        for i in 0..n {
            let (rows, vals) = st.row(i);
            for (p, (&ra, &va)) in rows.iter().zip(vals).enumerate() {
                diag[ra] += va * va;
                for (&rb, &vb) in rows[p + 1..].iter().zip(&vals[p + 1..]) {
                    if ra != rb && va * vb != 0.0 {
                        offdiag_nonzero = true;
                    }
                }
            }
        }
        let counts_match = (0..m).all(|r| diag[r] == sp.row(r).0.len() as f64);
        if offdiag_nonzero || !counts_match {
            violations += 1;
        }
        for (acc, v) in row_norm_sum.iter_mut().zip(&diag) {
            *acc += v;
        }

        // SᵀS restricted to the leading block: σ_i σ_j [h(i) = h(j)]
        let block = &s.hash_blocks().expect("CountSketch is hashed")[0];
        for i in 0..dim {
            for j in 0..dim {
                if block.buckets()[i] == block.buckets()[j] {
                    cov_sum[i * dim + j] += block.signs()[i] * block.signs()[j];
                }
            }
        }

        let x: f64 = (0..n)
            .filter(|&i| block.buckets()[i] == 0)
            .map(|i| block.signs()[i] * u[i])
            .sum();
        for (hits, eps) in tail_hits.iter_mut().zip(TAIL_EPSILONS) {
            if x >= eps * u_norm {
                *hits += 1;
            }
        }
    }

    let tf = trials as f64;
    let cov_dev = (0..dim * dim)
        .map(|k| {
            let target = if k / dim == k % dim { 1.0 } else { 0.0 };
            (cov_sum[k] / tf - target).abs()
        })
        .fold(0.0, f64::max);
    let expected_row = n as f64 / m as f64;
    let row_dev = row_norm_sum
        .iter()
        .map(|s| (s / tf - expected_row).abs())
        .fold(0.0, f64::max);
    let p = 1.0 / m as f64;
    let row_sd = (n as f64 * p * (1.0 - p)).sqrt();

    Ok(LemmaReport {
        m,
        n,
        trials,
        orthogonal_rows: OrthogonalRowsCheck {
            draws: trials,
            violations,
            column_violations,
        },
        covariance: MeanDeviationCheck {
            dim,
            max_deviation: cov_dev,
            threshold: 5.0 / tf.sqrt(),
        },
        row_gram: MeanDeviationCheck {
            dim: m,
            max_deviation: row_dev,
            threshold: 5.0 * row_sd / tf.sqrt(),
        },
        tails: TAIL_EPSILONS
            .iter()
            .zip(tail_hits)
            .map(|(&eps, hits)| TailCheck {
                epsilon: eps,
                frequency: hits as f64 / tf,
                bound: (-eps * eps / 2.0).exp(),
                slack: 3.0 * (0.25 / tf).sqrt(),
            })
            .collect(),
    })
}
