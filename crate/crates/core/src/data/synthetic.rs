//! Gaussian-design instances: `b = A x* + ω` with `ω_i ~ N(0, σ²)`.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ConstraintSet, DataMatrix, DenseMatrix, ProblemInstance, SparseMatrix};
use crate::rng::{mix_seed, rng_from_seed};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianDesignSpec {
    pub n: usize,
    pub d: usize,
    pub noise_sigma: f64,
    /// Nonzeros in the ground truth `x*`.
    pub ground_truth_sparsity: usize,
    /// Probability that an entry of `A` is kept.
    pub density: f64,
    pub seed: u64,
}

impl GaussianDesignSpec {
    /// Dense design with half of `x*` nonzero and unit noise.
    pub fn new(n: usize, d: usize, seed: u64) -> Self {
        Self {
            n,
            d,
            noise_sigma: 1.0,
            ground_truth_sparsity: d.div_ceil(2).max(1),
            density: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.d < 1 || self.n <= self.d {
            return bad(format!("need n > d >= 1, got n={} d={}", self.n, self.d));
        }
        if self.ground_truth_sparsity < 1 || self.ground_truth_sparsity > self.d {
            return bad(format!(
                "ground truth sparsity must lie in [1, {}], got {}",
                self.d, self.ground_truth_sparsity
            ));
        }
        if !(self.density > 0.0 && self.density <= 1.0) {
            return bad(format!("density must lie in (0, 1], got {}", self.density));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise sigma must be >= 0, got {}", self.noise_sigma));
        }
        Ok(())
    }
}

/// Returns the unconstrained instance and the ground truth `x*`.
///
/// With `density == 1` the matrix is stored dense; otherwise each entry is
/// kept independently with probability `density` and the result is sparse.
/// Separate RNG streams are used for the matrix, the ground truth and the
/// noise, all derived from `spec.seed`.
pub fn generate_gaussian_design(spec: &GaussianDesignSpec) -> Result<(ProblemInstance, Vec<f64>)> {
    spec.validate()?;
    let (n, d) = (spec.n, spec.d);

    let mut rng = rng_from_seed(mix_seed(spec.seed, 0));
    let a: DataMatrix = if spec.density >= 1.0 {
        let values = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
        DenseMatrix::new(n, d, values)?.into()
    } else {
        let mut row_offsets = Vec::with_capacity(n + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for _ in 0..n {
            for j in 0..d {
                if rng.random::<f64>() < spec.density {
                    let z: f64 = rng.sample(StandardNormal);
                    if z != 0.0 {
                        col_indices.push(j);
                        values.push(z);
                    }
                }
            }
            row_offsets.push(values.len());
        }
        SparseMatrix::new(n, d, row_offsets, col_indices, values)?.into()
    };

    let mut rng = rng_from_seed(mix_seed(spec.seed, 1));
    let mut x_star = vec![0.0; d];
    for j in sample(&mut rng, d, spec.ground_truth_sparsity) {
        x_star[j] = if rng.random::<bool>() { 1.0 } else { -1.0 };
    }

    let mut b = a.matvec(&x_star)?;
    if spec.noise_sigma > 0.0 {
        let mut rng = rng_from_seed(mix_seed(spec.seed, 2));
        let noise = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        for bi in &mut b {
            *bi += noise.sample(&mut rng);
        }
    }

    Ok((ProblemInstance::new(a, b, ConstraintSet::Unconstrained)?, x_star))
}
