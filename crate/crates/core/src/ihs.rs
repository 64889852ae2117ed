//! The Iterative Hessian Sketch.
//!
//! Starting from `x⁰ = 0`, every iteration draws a fresh sketch `S` and
//! minimises
//!
//! ```text
//! ½‖S A (x − xᵗ)‖² − ⟨Aᵀ(b − A xᵗ), x − xᵗ⟩   over x ∈ C
//! ```
//!
//! (plus `λ‖x‖₁` for the penalised problem). Only the Hessian is sketched;
//! the gradient is exact, which is what lets the iteration reach the true
//! optimum instead of the sketched one.

use std::fmt;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{DataMatrix, ProblemInstance};
use crate::linalg::{norm2, sub};
use crate::rng::mix_seed;
use crate::sketch::{apply_sketch, build_sketch, SketchOperator, SketchSpec};
use crate::solver::{solve_subproblem, QuadraticModel, SubSolverConfig, SubproblemSolution};
use crate::{Error, Result};

/// `‖Ax‖₂ / √n`.
pub fn prediction_norm(a: &DataMatrix, x: &[f64]) -> Result<f64> {
    let ax = a.matvec(x)?;
    Ok(norm2(&ax) / (a.n_rows() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IhsConfig {
    /// Template; iteration `t` uses the seed `mix_seed(sketch.seed, t)`.
    pub sketch: SketchSpec,
    pub n_iters: usize,
    #[serde(default)]
    pub subsolver: SubSolverConfig,
    /// `x_OPT`, used only to record prediction errors and for early exit.
    #[serde(default)]
    pub reference_solution: Option<Vec<f64>>,
    /// Stop once the accumulated sketch/build/solve time exceeds this many
    /// seconds.
    #[serde(default)]
    pub time_budget: Option<f64>,
    /// Early exit once the relative prediction error (with a reference) or
    /// the relative iterate change drops below this.
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
}

fn default_stop_tol() -> f64 {
    1e-13
}

impl IhsConfig {
    pub fn new(sketch: SketchSpec) -> Self {
        Self {
            sketch,
            n_iters: 20,
            subsolver: SubSolverConfig::default(),
            reference_solution: None,
            time_budget: None,
            stop_tol: default_stop_tol(),
        }
    }

    pub fn with_iters(mut self, n_iters: usize) -> Self {
        self.n_iters = n_iters;
        self
    }

    pub fn with_reference(mut self, x_opt: Vec<f64>) -> Self {
        self.reference_solution = Some(x_opt);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_iters < 1 {
            return Err(Error::InvalidArgument("n_iters must be >= 1".into()));
        }
        if let Some(b) = self.time_budget {
            if !(b > 0.0) {
                return Err(Error::InvalidArgument(format!("time budget must be positive, got {b}")));
            }
        }
        if !(self.stop_tol >= 0.0) {
            return Err(Error::InvalidArgument("stop_tol must be non-negative".into()));
        }
        self.sketch.validate()?;
        self.subsolver.validate()
    }
}

/// Wall-clock cost of one iteration, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepTiming {
    /// Drawing the sketch and forming `SA`.
    pub sketch: f64,
    /// `H = (SA)ᵀSA` and `g = −Aᵀ(b − Axᵗ)`.
    pub qp_build: f64,
    pub qp_solve: f64,
}

impl StepTiming {
    pub fn total(&self) -> f64 {
        self.sketch + self.qp_build + self.qp_solve
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub sketch_time: f64,
    pub qp_build_time: f64,
    pub qp_solve_time: f64,
    /// Sum of all sketch, build and solve times up to this iteration.
    pub cum_seconds: f64,
    /// `‖xᵗ − x_OPT‖_A`, present when a reference was given.
    pub prediction_error: Option<f64>,
    /// `f(xᵗ)`, including the penalty for the penalised problem.
    pub objective: f64,
    pub inner_iterations: usize,
    pub inner_converged: bool,
}

/// One record per iterate, starting with `x⁰`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IhsTrace {
    pub records: Vec<IterationRecord>,
}

impl IhsTrace {
    pub fn errors(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.prediction_error).collect()
    }

    pub fn total_seconds(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.cum_seconds)
    }
}

/// A failed iteration, with the records of the iterations that completed.
#[derive(Debug)]
pub struct IhsFailure {
    pub error: Error,
    pub trace: IhsTrace,
}

impl fmt::Display for IhsFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "iteration {} failed: {}",
            self.trace.records.len(),
            self.error
        )
    }
}

impl std::error::Error for IhsFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<IhsFailure> for Error {
    fn from(f: IhsFailure) -> Self {
        f.error
    }
}

/// One IHS update from `x_t` using the realised sketch `s`.
pub fn ihs_step(
    problem: &ProblemInstance,
    x_t: &[f64],
    s: &SketchOperator,
    cfg: &SubSolverConfig,
) -> Result<Vec<f64>> {
    ihs_step_timed(problem, x_t, s, cfg).map(|(sol, _)| sol.x)
}

fn ihs_step_timed(
    problem: &ProblemInstance,
    x_t: &[f64],
    s: &SketchOperator,
    cfg: &SubSolverConfig,
) -> Result<(SubproblemSolution, StepTiming)> {
    if x_t.len() != problem.d() {
        return Err(Error::DimensionMismatch(format!(
            "iterate has length {}, problem has {} columns",
            x_t.len(),
            problem.d()
        )));
    }
    if s.n() != problem.n() {
        return Err(Error::DimensionMismatch(format!(
            "sketch expects {} rows, problem has {}",
            s.n(),
            problem.n()
        )));
    }
    let t0 = Instant::now();
    let sa = apply_sketch(s, problem.a())?;
    let t1 = Instant::now();
    let h = sa.gram();
    let a = problem.a();
    let r = sub(problem.b(), &a.matvec(x_t)?);
    let g: Vec<f64> = a.matvec_transpose(&r)?.into_iter().map(|v| -v).collect();
    let model = QuadraticModel::new(h, g, x_t.to_vec())?;
    let t2 = Instant::now();
    let sol = solve_subproblem(&model, problem.constraint(), cfg)?;
    let t3 = Instant::now();
    Ok((
        sol,
        StepTiming {
            sketch: (t1 - t0).as_secs_f64(),
            qp_build: (t2 - t1).as_secs_f64(),
            qp_solve: (t3 - t2).as_secs_f64(),
        },
    ))
}

/// Runs the iteration from `x⁰ = 0`.
///
/// Stops after `n_iters` updates, when the time budget is spent, or at the
/// early-exit tolerance. The returned trace holds one record per iterate
/// including `x⁰`.
pub fn ihs_solve(
    problem: &ProblemInstance,
    cfg: &IhsConfig,
) -> std::result::Result<(Vec<f64>, IhsTrace), IhsFailure> {
    let fail = |error: Error, trace: IhsTrace| IhsFailure { error, trace };
    if let Err(e) = cfg.validate() {
        return Err(fail(e, IhsTrace::default()));
    }
    let reference = cfg.reference_solution.as_deref();
    if let Some(r) = reference {
        if r.len() != problem.d() {
            return Err(fail(
                Error::DimensionMismatch(format!(
                    "reference has length {}, problem has {} columns",
                    r.len(),
                    problem.d()
                )),
                IhsTrace::default(),
            ));
        }
    }
    let ref_norm = match reference.map(|r| prediction_norm(problem.a(), r)) {
        Some(Err(e)) => return Err(fail(e, IhsTrace::default())),
        Some(Ok(v)) => Some(v),
        None => None,
    };

    let d = problem.d();
    let mut x = vec![0.0; d];
    let mut trace = IhsTrace::default();
    let mut cum = 0.0;

    let evaluate = |x: &[f64]| -> Result<(Option<f64>, f64)> {
        let err = match reference {
            Some(r) => Some(prediction_norm(problem.a(), &sub(x, r))?),
            None => None,
        };
        Ok((err, problem.objective(x)?))
    };

    let (e0, f0) = match evaluate(&x) {
        Ok(v) => v,
        Err(e) => return Err(fail(e, trace)),
    };
    trace.records.push(IterationRecord {
        iteration: 0,
        sketch_time: 0.0,
        qp_build_time: 0.0,
        qp_solve_time: 0.0,
        cum_seconds: 0.0,
        prediction_error: e0,
        objective: f0,
        inner_iterations: 0,
        inner_converged: true,
    });
    if reached_floor(e0, ref_norm, cfg.stop_tol) {
        return Ok((x, trace));
    }

    for t in 1..=cfg.n_iters {
        let spec = cfg.sketch.with_seed(mix_seed(cfg.sketch.seed, t as u64));
        let t0 = Instant::now();
        let step = build_sketch(&spec, problem.n()).and_then(|s| {
            let drawn = t0.elapsed().as_secs_f64();
            ihs_step_timed(problem, &x, &s, &cfg.subsolver).map(|(sol, mut timing)| {
                timing.sketch += drawn;
                (sol, timing)
            })
        });
        let (sol, timing) = match step {
            Ok(v) => v,
            Err(e) => return Err(fail(e, trace)),
        };
        if !sol.converged {
            log::warn!(
                "iteration {t}: subproblem solver stopped after {} iterations without converging",
                sol.iterations
            );
        }
        cum += timing.total();
        let change = norm2(&sub(&sol.x, &x)) / norm2(&x).max(f64::MIN_POSITIVE);
        x = sol.x;
        let (err, obj) = match evaluate(&x) {
            Ok(v) => v,
            Err(e) => return Err(fail(e, trace)),
        };
        trace.records.push(IterationRecord {
            iteration: t,
            sketch_time: timing.sketch,
            qp_build_time: timing.qp_build,
            qp_solve_time: timing.qp_solve,
            cum_seconds: cum,
            prediction_error: err,
            objective: obj,
            inner_iterations: sol.iterations,
            inner_converged: sol.converged,
        });

        if reached_floor(err, ref_norm, cfg.stop_tol) || change <= cfg.stop_tol {
            break;
        }
        if cfg.time_budget.is_some_and(|b| cum >= b) {
            break;
        }
    }
    Ok((x, trace))
}

fn reached_floor(err: Option<f64>, ref_norm: Option<f64>, tol: f64) -> bool {
    match (err, ref_norm) {
        (Some(e), Some(r)) if r > 0.0 => e <= tol * r,
        (Some(e), Some(_)) => e == 0.0,
        _ => false,
    }
}

/// Unit vector along the residual `b − Ax`, the default direction for the
/// `Z₂` diagnostic. Falls back to `e₁` when the residual vanishes.
pub fn residual_direction(problem: &ProblemInstance, x: &[f64]) -> Result<Vec<f64>> {
    let mut r = sub(problem.b(), &problem.a().matvec(x)?);
    let norm = norm2(&r);
    if norm > 0.0 {
        r.iter_mut().for_each(|v| *v /= norm);
    } else {
        r[0] = 1.0;
    }
    Ok(r)
}
