use std::time::Instant;

use super::{
    BaselineSeries, BenchReport, ConvergencePoint, ConvergenceRun, ConvergenceSeries, DatasetInfo,
    Environment, ExperimentKind, Method, Series, Summary, ERROR_FLOOR, SCHEMA_VERSION,
};
use crate::data::ProblemInstance;
use crate::ihs::{ihs_solve, prediction_norm, IhsConfig};
use crate::rng::mix_seed;
use crate::sketch::diagnostics::relative_gram_error;
use crate::sketch::{apply_sketch, build_sketch};
use crate::solver::{exact_solve, SubSolverConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineOptions {
    pub methods: Vec<Method>,
    pub trials: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOptions {
    pub methods: Vec<Method>,
    pub trials: usize,
    pub seed: u64,
    /// Wall-clock budget per run, counting sketch, build and solve time.
    pub time_budget: f64,
    /// Cap on iterations per run.
    pub max_iters: usize,
    pub subsolver: SubSolverConfig,
}

impl ConvergenceOptions {
    pub fn new(methods: Vec<Method>, trials: usize, seed: u64) -> Self {
        Self {
            methods,
            trials,
            seed,
            time_budget: 10.0,
            max_iters: 200,
            subsolver: SubSolverConfig::default(),
        }
    }
}

fn dataset_info(name: &str, problem: &ProblemInstance) -> DatasetInfo {
    DatasetInfo {
        name: name.to_string(),
        n: problem.n(),
        d: problem.d(),
        density: problem.a().density(),
    }
}

/// Seed of method `k` in a run; trial `t` then uses `mix_seed(that, t)`.
pub(crate) fn method_seed(seed: u64, k: usize) -> u64 {
    mix_seed(seed, k as u64)
}

/// Sketch error and apply time for every method over `trials` draws.
///
/// Each method gets one untimed warm-up application first. Operator
/// construction and application are timed separately, serially. Trial `t` of
/// method `k` uses the sketch seed `mix_seed(mix_seed(seed, k), t)`.
pub fn run_sketch_baseline(name: &str, problem: &ProblemInstance, opts: &BaselineOptions) -> Result<BenchReport> {
    if opts.trials < 1 || opts.methods.is_empty() {
        return Err(Error::InvalidArgument("baseline needs at least one method and one trial".into()));
    }
    let a = problem.a();
    let (n, d) = (problem.n(), problem.d());
    let ata = a.gram();
    let norm = ata.frobenius_norm();
    if norm == 0.0 {
        return Err(Error::Numerical("AᵀA = 0, relative sketch error undefined".into()));
    }

    let mut series = Vec::new();
    for (k, method) in opts.methods.iter().enumerate() {
        let base = method.spec(n, d, method_seed(opts.seed, k))?;
        if base.m > n {
            log::warn!("{}: m = {} exceeds n = {n}", method.label(), base.m);
        }
        let warm = build_sketch(&base.with_seed(mix_seed(base.seed, u64::MAX)), n)?;
        apply_sketch(&warm, a)?;
        drop(warm);

        let (mut errors, mut apply, mut build) = (Vec::new(), Vec::new(), Vec::new());
        for t in 0..opts.trials as u64 {
            let spec = base.with_seed(mix_seed(base.seed, t));
            let t0 = Instant::now();
            let s = build_sketch(&spec, n)?;
            let t1 = Instant::now();
            let sa = apply_sketch(&s, a)?;
            let t2 = Instant::now();
            drop(s);
            build.push((t1 - t0).as_secs_f64());
            apply.push((t2 - t1).as_secs_f64());
            errors.push(relative_gram_error(&sa, &ata, norm));
        }
        log::info!("{}: mean sketch error {:.3e}", method.label(), errors.iter().sum::<f64>() / errors.len() as f64);
        series.push(Series::Baseline(BaselineSeries {
            method: method.label(),
            family: method.family,
            gamma: method.gamma,
            s: method.s,
            m: base.m,
            trials: opts.trials,
            sketch_error: Summary::from_values(errors),
            sketch_seconds: Summary::from_values(apply),
            build_seconds: Summary::from_values(build),
        }));
    }
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        kind: ExperimentKind::SketchBaseline,
        dataset: dataset_info(name, problem),
        series,
        environment: Environment::capture(opts.seed),
    })
}

/// Error-versus-time curves of the sketched iteration.
///
/// The reference `x_OPT` comes from [`exact_solve`]. Every run stops at the
/// time budget, the iteration cap, or when the relative error reaches the
/// early-exit tolerance. Errors are relative to `‖x_OPT‖_A`.
pub fn run_convergence(name: &str, problem: &ProblemInstance, opts: &ConvergenceOptions) -> Result<BenchReport> {
    if opts.trials < 1 || opts.methods.is_empty() {
        return Err(Error::InvalidArgument("convergence run needs at least one method and one trial".into()));
    }
    if !(opts.time_budget > 0.0) || opts.max_iters < 1 {
        return Err(Error::InvalidArgument("time budget and iteration cap must be positive".into()));
    }
    let (n, d) = (problem.n(), problem.d());
    let reference = exact_solve(problem, &opts.subsolver)?;
    if !reference.converged {
        log::warn!("reference solve stopped before reaching its tolerance");
    }
    let ref_norm = prediction_norm(problem.a(), &reference.x)?;
    let scale = if ref_norm > 0.0 { ref_norm } else { 1.0 };

    let mut series = Vec::new();
    for (k, method) in opts.methods.iter().enumerate() {
        let base = method.spec(n, d, method_seed(opts.seed, k))?;
        let make_cfg = |seed: u64, iters: usize| IhsConfig {
            sketch: base.with_seed(seed),
            n_iters: iters,
            subsolver: opts.subsolver,
            reference_solution: Some(reference.x.clone()),
            time_budget: Some(opts.time_budget),
            stop_tol: 1e-13,
        };
        ihs_solve(problem, &make_cfg(mix_seed(base.seed, u64::MAX), 1))?;

        let mut runs = Vec::new();
        for t in 0..opts.trials {
            let seed = mix_seed(base.seed, t as u64);
            let (_, trace) = ihs_solve(problem, &make_cfg(seed, opts.max_iters))?;
            let points = trace
                .records
                .iter()
                .map(|r| {
                    let raw = r.prediction_error.unwrap_or(f64::NAN) / scale;
                    ConvergencePoint {
                        iteration: r.iteration,
                        cum_seconds: r.cum_seconds,
                        error: raw.max(ERROR_FLOOR),
                        raw_error: raw,
                    }
                })
                .collect::<Vec<_>>();
            log::info!(
                "{} trial {t}: {} iterations, final error {:.3e}",
                method.label(),
                points.len() - 1,
                points.last().map_or(f64::NAN, |p| p.raw_error)
            );
            runs.push(ConvergenceRun { trial: t, seed, points });
        }
        let mean = ConvergenceSeries::aggregate(&runs);
        series.push(Series::Convergence(ConvergenceSeries {
            method: method.label(),
            family: method.family,
            gamma: method.gamma,
            s: method.s,
            m: base.m,
            trials: opts.trials,
            runs,
            mean,
        }));
    }
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        kind: ExperimentKind::Convergence,
        dataset: dataset_info(name, problem),
        series,
        environment: Environment::capture(opts.seed),
    })
}
