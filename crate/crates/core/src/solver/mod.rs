//! Quadratic subproblem solvers.
//!
//! Every IHS iteration minimises
//!
//! ```text
//! q(x) = ½ (x − x_t)ᵀ H (x − x_t) + gᵀ (x − x_t)      over x ∈ C
//! ```
//!
//! with `H = (SA)ᵀSA` and `g = −Aᵀ(b − A x_t)`, plus `λ‖x‖₁` for the
//! penalised form. The unconstrained case is a Cholesky solve; the others
//! use accelerated proximal gradient. For the ℓ1 penalty the first-order
//! solution is finished by an active-set solve on the detected support, so
//! the returned point satisfies the optimality conditions to rounding.

mod accelerated;
mod projection;

pub use projection::{project_l1, project_l2, soft_threshold};

use serde::{Deserialize, Serialize};

use crate::data::{ConstraintSet, DenseMatrix, ProblemInstance};
use crate::linalg::{dot, norm_inf, power_iteration, symv, Cholesky};
use crate::{Error, Result};
use accelerated::{minimize, BallProx, L1Prox, Prox, Settings};

/// Power iterations used for the step-size estimate.
const POWER_ITERS: usize = 50;

/// Quadratic model `½ (x − a)ᵀ H (x − a) + gᵀ (x − a)` around the anchor `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    h: DenseMatrix,
    g: Vec<f64>,
    x_anchor: Vec<f64>,
}

impl QuadraticModel {
    /// Checks shapes and symmetry; positive semidefiniteness is checked by
    /// [`solve_subproblem`].
    pub fn new(h: DenseMatrix, g: Vec<f64>, x_anchor: Vec<f64>) -> Result<Self> {
        let d = g.len();
        if h.n_rows() != d || h.n_cols() != d || x_anchor.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "model with H {}x{}, g of length {d}, anchor of length {}",
                h.n_rows(),
                h.n_cols(),
                x_anchor.len()
            )));
        }
        let scale = h.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for i in 0..d {
            for j in 0..i {
                if (h.get(i, j) - h.get(j, i)).abs() > 1e-12 * scale {
                    return Err(Error::InvalidArgument(format!(
                        "H is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { h, g, x_anchor })
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn hessian(&self) -> &DenseMatrix {
        &self.h
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.g
    }

    pub fn anchor(&self) -> &[f64] {
        &self.x_anchor
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let u: Vec<f64> = x.iter().zip(&self.x_anchor).map(|(a, b)| a - b).collect();
        0.5 * dot(&u, &symv(&self.h, &u)) + dot(&self.g, &u)
    }

    /// `H (x − a) + g`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let u: Vec<f64> = x.iter().zip(&self.x_anchor).map(|(a, b)| a - b).collect();
        symv(&self.h, &u)
            .into_iter()
            .zip(&self.g)
            .map(|(p, q)| p + q)
            .collect()
    }

    /// Linear term of the model rewritten around the origin: `g − H a`.
    fn shifted_linear_term(&self) -> Vec<f64> {
        let ha = symv(&self.h, &self.x_anchor);
        self.g.iter().zip(&ha).map(|(g, h)| g - h).collect()
    }

    fn check_psd(&self) -> Result<()> {
        let norm = self.h.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if norm == 0.0 {
            return Ok(());
        }
        let mut shifted = self.h.clone();
        let delta = 1e-10 * norm * self.dim() as f64;
        for i in 0..self.dim() {
            shifted.set(i, i, shifted.get(i, i) + delta);
        }
        Cholesky::factor(&shifted, 0.0).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// `1/L` with `L` from power iteration on `H`, doubled if a step ever
    /// violates the curvature bound.
    FixedFromSpectralBound,
    /// Starts from `L = trace(H)/d` and doubles on violation.
    Backtracking,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubSolverConfig {
    pub max_inner_iters: usize,
    /// Gradient-mapping tolerance relative to `max(‖g‖∞, λ)`.
    pub tolerance: f64,
    pub step_policy: StepPolicy,
}

impl Default for SubSolverConfig {
    fn default() -> Self {
        Self {
            max_inner_iters: 5000,
            tolerance: 1e-10,
            step_policy: StepPolicy::FixedFromSpectralBound,
        }
    }
}

impl SubSolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_inner_iters < 1 {
            return Err(Error::InvalidArgument(format!(
                "sub-solver needs tolerance > 0 and max_inner_iters >= 1, got {} / {}",
                self.tolerance, self.max_inner_iters
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub x: Vec<f64>,
    /// False when the inner solver hit `max_inner_iters`; `x` is then the
    /// best iterate found.
    pub converged: bool,
    pub iterations: usize,
    /// Model value plus penalty at `x`.
    pub objective: f64,
}

pub fn solve_subproblem(
    model: &QuadraticModel,
    constraint: ConstraintSet,
    cfg: &SubSolverConfig,
) -> Result<SubproblemSolution> {
    solve_inner(model, constraint, cfg, false).map(|(s, _)| s)
}

pub(crate) fn solve_inner(
    model: &QuadraticModel,
    constraint: ConstraintSet,
    cfg: &SubSolverConfig,
    keep_history: bool,
) -> Result<(SubproblemSolution, Vec<f64>)> {
    cfg.validate()?;
    constraint.validate()?;
    model.check_psd()?;

    let finish = |x: Vec<f64>, converged: bool, iterations: usize| SubproblemSolution {
        objective: model.value(&x) + constraint.penalty(&x),
        x,
        converged,
        iterations,
    };

    if constraint == ConstraintSet::Unconstrained {
        let x = newton_step(model)?;
        return Ok((finish(x, true, 1), Vec::new()));
    }

    let c = model.shifted_linear_term();
    let lambda = match constraint {
        ConstraintSet::L1Penalty { lambda } => lambda,
        _ => 0.0,
    };
    let scale = norm_inf(&model.g).max(lambda).max(f64::MIN_POSITIVE);
    let settings = Settings {
        lipschitz: initial_lipschitz(&model.h, cfg.step_policy),
        max_iters: cfg.max_inner_iters,
        tol_abs: cfg.tolerance * scale,
        keep_history,
    };

    let out = match constraint {
        ConstraintSet::L1Penalty { lambda } => {
            let mut out = minimize(&model.h, &c, &L1Prox(lambda), model.x_anchor.clone(), &settings);
            if let Some(x) = polish_l1(&model.h, &c, lambda, &out.x, scale) {
                let f = |z: &[f64]| 0.5 * dot(z, &symv(&model.h, z)) + dot(&c, z) + L1Prox(lambda).value(z);
                if f(&x) <= f(&out.x) + 1e-12 * f(&out.x).abs().max(1e-300) {
                    out.x = x;
                    out.converged = true;
                }
            }
            out
        }
        ConstraintSet::L1Ball { radius } => {
            let prox = BallProx(move |v: &[f64]| project_l1(v, radius));
            let x0 = project_l1(&model.x_anchor, radius);
            minimize(&model.h, &c, &prox, x0, &settings)
        }
        ConstraintSet::L2Ball { radius } => {
            let prox = BallProx(move |v: &[f64]| project_l2(v, radius));
            let x0 = project_l2(&model.x_anchor, radius);
            minimize(&model.h, &c, &prox, x0, &settings)
        }
        ConstraintSet::Unconstrained => unreachable!(),
    };
    Ok((finish(out.x, out.converged, out.iterations), out.history))
}

fn initial_lipschitz(h: &DenseMatrix, policy: StepPolicy) -> f64 {
    let d = h.n_rows().max(1) as f64;
    let l = match policy {
        StepPolicy::FixedFromSpectralBound => 1.01 * power_iteration(h, POWER_ITERS),
        StepPolicy::Backtracking => h.trace() / d,
    };
    if l > 0.0 && l.is_finite() {
        l
    } else {
        1.0
    }
}

/// `a − H⁻¹ g`, regularising `H` by `1e-12 · trace(H)/d · I` when the plain
/// factorisation fails.
fn newton_step(model: &QuadraticModel) -> Result<Vec<f64>> {
    let d = model.dim();
    let chol = match Cholesky::factor(&model.h, 1e-13) {
        Ok(c) => c,
        Err(_) => {
            let reg = 1e-12 * model.h.trace() / d.max(1) as f64;
            let mut h = model.h.clone();
            for i in 0..d {
                h.set(i, i, h.get(i, i) + reg);
            }
            Cholesky::factor(&h, 0.0).map_err(|_| {
                Error::Numerical("approximate Hessian is singular even after regularisation".into())
            })?
        }
    };
    let neg_g: Vec<f64> = model.g.iter().map(|v| -v).collect();
    let u = chol.solve(&neg_g);
    Ok(model.x_anchor.iter().zip(&u).map(|(a, b)| a + b).collect())
}

/// Active-set refinement for `½ xᵀHx + cᵀx + λ‖x‖₁`: solves the stationarity
/// equations on the support of `x` with its sign pattern, repairing the
/// support a few times. Returns a point that satisfies the optimality
/// conditions, or `None`.
fn polish_l1(h: &DenseMatrix, c: &[f64], lambda: f64, x: &[f64], scale: f64) -> Option<Vec<f64>> {
    let d = x.len();
    let mut signs: Vec<f64> = x.iter().map(|&v| if v > 0.0 { 1.0 } else if v < 0.0 { -1.0 } else { 0.0 }).collect();
    let kkt_slack = lambda * 1e-9 + 1e-12 * scale;

    for _ in 0..8 {
        let support: Vec<usize> = (0..d).filter(|&j| signs[j] != 0.0).collect();
        let mut cand = vec![0.0; d];
        if !support.is_empty() {
            let k = support.len();
            let mut hs = DenseMatrix::zeros(k, k);
            for (p, &i) in support.iter().enumerate() {
                for (q, &j) in support.iter().enumerate() {
                    hs.set(p, q, h.get(i, j));
                }
            }
            let rhs: Vec<f64> = support.iter().map(|&j| -c[j] - lambda * signs[j]).collect();
            let sol = Cholesky::factor(&hs, 1e-14).ok()?.solve(&rhs);
            for (&j, v) in support.iter().zip(sol) {
                cand[j] = v;
            }
        }

        let mut changed = false;
        for &j in &support {
            if cand[j] * signs[j] <= 0.0 {
                signs[j] = 0.0;
                changed = true;
            }
        }
        if changed {
            continue;
        }
        let grad: Vec<f64> = symv(h, &cand).iter().zip(c).map(|(a, b)| a + b).collect();
        for j in 0..d {
            if signs[j] == 0.0 && grad[j].abs() > lambda + kkt_slack {
                signs[j] = -grad[j].signum();
                changed = true;
            }
        }
        if !changed {
            return Some(cand);
        }
    }
    None
}

/// Largest violation of the ℓ1-penalised optimality conditions at `x`:
/// `|∇q_j| ≤ λ` where `x_j = 0`, `∇q_j = −λ sign(x_j)` elsewhere.
pub fn l1_optimality_violation(model: &QuadraticModel, lambda: f64, x: &[f64]) -> f64 {
    model
        .gradient(x)
        .iter()
        .zip(x)
        .map(|(&g, &xj)| {
            if xj == 0.0 {
                (g.abs() - lambda).max(0.0)
            } else {
                (g + lambda * xj.signum()).abs()
            }
        })
        .fold(0.0, f64::max)
}

/// Reference solution `x_OPT` of the full problem: the true Hessian `AᵀA`
/// is formed once and the subproblem around `x = 0` is solved to a relative
/// tolerance of at most `1e-12`.
pub fn exact_solve(problem: &ProblemInstance, cfg: &SubSolverConfig) -> Result<SubproblemSolution> {
    let a = problem.a();
    let h = a.gram();
    let g: Vec<f64> = a.matvec_transpose(problem.b())?.into_iter().map(|v| -v).collect();
    let model = QuadraticModel::new(h, g, vec![0.0; problem.d()])?;
    let cfg = SubSolverConfig {
        tolerance: cfg.tolerance.min(1e-12),
        max_inner_iters: cfg.max_inner_iters.max(100_000),
        ..*cfg
    };
    let mut sol = solve_subproblem(&model, problem.constraint(), &cfg)?;
    sol.objective = problem.objective(&sol.x)?;
    Ok(sol)
}
