//! The `hsketch` command line.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors (missing or
//! malformed input, bad reports) and 3 for numerical failures. Every error is
//! printed to standard error behind the prefix `hsketch: error: `.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::bench::{
    report_to_csv, run_convergence, run_sketch_baseline, write_csv, BaselineOptions, BenchReport,
    ConvergenceOptions, Method,
};
use crate::data::{
    generate_gaussian_design, load_csv, load_svmlight, write_svmlight, ConstraintSet, Dataset,
    GaussianDesignSpec, ProblemInstance, SvmlightOptions,
};
use crate::ihs::{ihs_solve, prediction_norm, residual_direction, IhsConfig, IhsTrace};
use crate::linalg::sub;
use crate::rng::mix_seed;
use crate::sketch::diagnostics::{diagnose_lemmas, estimate_z1_z2, subspace_distortion, LemmaReport};
use crate::sketch::{build_sketch, SketchFamily, SketchSpec};
use crate::solver::{exact_solve, SubSolverConfig};
use crate::{Error, ErrorClass, Result};

pub const ERROR_PREFIX: &str = "hsketch: error: ";

#[derive(Debug, Parser)]
#[command(name = "hsketch", version, about = "Iterative Hessian Sketch for constrained least squares")]
struct Cli {
    /// Base seed for every random choice.
    #[arg(long, global = true, env = "HS_SEED")]
    seed: Option<u64>,
    /// Worker threads; results are reproducible for a fixed count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file with defaults for seed, threads, trials, budgets and methods.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress to standard error (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the sketched iteration and write the solution and per-iteration trace.
    Solve(SolveArgs),
    /// Solve to high accuracy with the exact Hessian.
    Exact(ExactArgs),
    /// Sketch error and sketch time for several families and ratios.
    SketchBench(SketchBenchArgs),
    /// Error-versus-time curves of the sketched iteration.
    ConvergeBench(ConvergeBenchArgs),
    /// Check the CountSketch lemmas and measure subspace embedding quality.
    Diagnose(DiagnoseArgs),
    /// Write a synthetic Gaussian-design instance in svmlight format.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum InputFormat {
    Svmlight,
    Csv,
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Data file (svmlight, or CSV with the target in the first column).
    #[arg(long, conflicts_with = "synthetic")]
    input: Option<PathBuf>,
    /// Synthetic instance, e.g. `n=2048,d=16,sigma=1,k=8,density=1,seed=3`.
    #[arg(long)]
    synthetic: Option<String>,
    /// Input format; guessed from the extension by default.
    #[arg(long, value_enum)]
    format: Option<InputFormat>,
    /// Number of features for svmlight input (default: largest index seen).
    #[arg(long)]
    features: Option<usize>,
    /// Rescale columns to unit norm; solutions are mapped back.
    #[arg(long)]
    scale_columns: bool,
    /// Keep a uniformly sampled 2^⌊log2 n⌋ rows (no SRHT padding).
    #[arg(long)]
    pow2_subsample: bool,
}

#[derive(Debug, Args)]
#[group(multiple = false)]
struct ConstraintArgs {
    /// Penalised problem with weight λ on ‖x‖₁.
    #[arg(long, value_name = "LAMBDA")]
    lasso: Option<f64>,
    /// Constrain ‖x‖₁ ≤ RADIUS.
    #[arg(long, value_name = "RADIUS")]
    l1_ball: Option<f64>,
    /// Constrain ‖x‖₂ ≤ RADIUS.
    #[arg(long, value_name = "RADIUS")]
    l2_ball: Option<f64>,
}

impl ConstraintArgs {
    fn constraint(&self) -> ConstraintSet {
        match (self.lasso, self.l1_ball, self.l2_ball) {
            (Some(lambda), _, _) => ConstraintSet::L1Penalty { lambda },
            (_, Some(radius), _) => ConstraintSet::L1Ball { radius },
            (_, _, Some(radius)) => ConstraintSet::L2Ball { radius },
            _ => ConstraintSet::Unconstrained,
        }
    }
}

#[derive(Debug, Args)]
struct SketchArgs {
    /// gaussian, srht, countsketch, sjlt or exact.
    #[arg(long, default_value = "countsketch")]
    sketch: String,
    /// Projection ratio γ, with m = ⌈γ d⌉.
    #[arg(long, default_value_t = 10.0)]
    gamma: f64,
    /// Nonzeros per column for SJLT.
    #[arg(long, default_value_t = 1)]
    s: usize,
}

impl SketchArgs {
    fn method(&self) -> Result<Method> {
        let family: SketchFamily = self.sketch.parse()?;
        Ok(Method {
            family,
            gamma: self.gamma,
            s: self.s,
        })
    }
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    constraint: ConstraintArgs,
    #[command(flatten)]
    sketch: SketchArgs,
    /// Number of sketched iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Stop once the accumulated iteration time exceeds this many seconds.
    #[arg(long)]
    time_budget: Option<f64>,
    /// Skip computing the exact solution (the trace then has no errors).
    #[arg(long)]
    no_reference: bool,
    /// Where to write the JSON result (`-` for standard output).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write the trace as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExactArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    constraint: ConstraintArgs,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SketchBenchArgs {
    #[command(flatten)]
    input: InputArgs,
    /// Methods as `family:gamma[:s]`; overrides --families/--gammas.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "gaussian,srht,countsketch,sjlt")]
    families: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,5,8,10")]
    gammas: Vec<f64>,
    /// Nonzeros per column for SJLT entries built from --families.
    #[arg(long, default_value_t = 4)]
    sjlt_s: usize,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ConvergeBenchArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    constraint: ConstraintArgs,
    /// Methods as `family:gamma[:s]` or `exact`.
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    trials: Option<usize>,
    /// Seconds per run.
    #[arg(long)]
    time_budget: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    /// Input length of the CountSketch used for the lemma checks.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Rows of that CountSketch.
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Draws for the lemma checks.
    #[arg(long)]
    trials: Option<usize>,
    /// Optional data set for the subspace-embedding measurement.
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    sketch: SketchArgs,
    /// Sketch draws for the embedding measurement.
    #[arg(long, default_value_t = 10)]
    seeds: usize,
    /// Distortion above which an embedding counts as failed.
    #[arg(long, default_value_t = 0.5)]
    max_distortion: f64,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Instance description, e.g. `n=50000,d=300,density=0.04`.
    #[arg(long)]
    synthetic: String,
    /// Destination svmlight file (`-` for standard output).
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Also write the ground truth, one value per line.
    #[arg(long)]
    truth: Option<PathBuf>,
}

/// Defaults read from `--config`; command-line flags take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub trials: Option<usize>,
    pub time_budget: Option<f64>,
    pub max_iters: Option<usize>,
    pub iters: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub subsolver: Option<SubSolverConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Report(format!("{}: {e}", path.display())))
    }
}

/// Parsed `k=v,k=v` synthetic description.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub spec: GaussianDesignSpec,
    pub seed_given: bool,
}

/// Parses `n=..,d=..[,sigma=..][,k=..][,density=..][,seed=..]`.
pub fn parse_synthetic(text: &str, default_seed: u64) -> Result<SyntheticSpec> {
    let bad = |msg: String| Error::InvalidArgument(format!("synthetic spec {text:?}: {msg}"));
    let mut n = None;
    let mut d = None;
    let mut sigma = None;
    let mut k = None;
    let mut density = None;
    let mut seed = None;
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| bad(format!("expected key=value, got {item:?}")))?;
        let value = value.trim();
        let int = || value.parse::<usize>().map_err(|_| bad(format!("{key} must be an integer")));
        let real = || value.parse::<f64>().map_err(|_| bad(format!("{key} must be a number")));
        match key.trim() {
            "n" => n = Some(int()?),
            "d" => d = Some(int()?),
            "sigma" => sigma = Some(real()?),
            "k" => k = Some(int()?),
            "density" => density = Some(real()?),
            "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad("seed must be an integer".into()))?),
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
    }
    let (n, d) = match (n, d) {
        (Some(n), Some(d)) => (n, d),
        _ => return Err(bad("n and d are required".into())),
    };
    let mut spec = GaussianDesignSpec::new(n, d, seed.unwrap_or(default_seed));
    if let Some(s) = sigma {
        spec.noise_sigma = s;
    }
    if let Some(k) = k {
        spec.ground_truth_sparsity = k;
    }
    if let Some(r) = density {
        spec.density = r;
    }
    spec.validate()?;
    Ok(SyntheticSpec {
        spec,
        seed_given: seed.is_some(),
    })
}

/// Runs the command line and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    0
                }
                _ => {
                    let text = e.render().to_string();
                    let text = text.strip_prefix("error: ").unwrap_or(&text);
                    eprint!("{ERROR_PREFIX}{text}");
                    1
                }
            };
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .format_timestamp(None)
        .try_init();

    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{ERROR_PREFIX}{e}");
            match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            }
        }
    }
}

struct Context {
    seed: u64,
    config: RunConfig,
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let seed = cli.seed.or(config.seed).unwrap_or(0);
    let threads = cli.threads.or(config.threads).unwrap_or(1);
    if threads < 1 {
        return Err(Error::InvalidArgument("--threads must be >= 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {threads} threads: {e}")))?;
    let ctx = Context { seed, config };
    pool.install(|| match cli.command {
        Command::Solve(a) => solve(&ctx, a),
        Command::Exact(a) => exact(&ctx, a),
        Command::SketchBench(a) => sketch_bench(&ctx, a),
        Command::ConvergeBench(a) => converge_bench(&ctx, a),
        Command::Diagnose(a) => diagnose(&ctx, a),
        Command::Generate(a) => generate(&ctx, a),
    })
}

/// A loaded instance together with the column factors applied to it.
struct Loaded {
    name: String,
    problem: ProblemInstance,
    column_scales: Option<Vec<f64>>,
}

impl Loaded {
    /// Maps a solution of the rescaled problem back to original columns.
    fn unscale(&self, mut x: Vec<f64>) -> Vec<f64> {
        if let Some(s) = &self.column_scales {
            x.iter_mut().zip(s).for_each(|(v, f)| *v *= f);
        }
        x
    }
}

fn load_input(ctx: &Context, input: &InputArgs, constraint: ConstraintSet) -> Result<Loaded> {
    let (name, dataset) = match (&input.input, &input.synthetic) {
        (Some(path), None) => {
            let format = input.format.unwrap_or_else(|| {
                match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase) {
                    Some(ext) if ext == "csv" => InputFormat::Csv,
                    _ => InputFormat::Svmlight,
                }
            });
            let ds = match format {
                InputFormat::Svmlight => load_svmlight(
                    path,
                    SvmlightOptions {
                        n_features: input.features,
                    },
                )?,
                InputFormat::Csv => {
                    if input.features.is_some() {
                        return Err(Error::InvalidArgument("--features only applies to svmlight input".into()));
                    }
                    load_csv(path)?
                }
            };
            let name = path
                .file_stem()
                .map_or_else(|| "input".to_string(), |s| s.to_string_lossy().into_owned());
            (name, ds)
        }
        (None, Some(spec)) => {
            let parsed = parse_synthetic(spec, ctx.seed)?;
            let (p, _) = generate_gaussian_design(&parsed.spec)?;
            let s = &parsed.spec;
            (format!("synthetic-n{}-d{}", s.n, s.d), p.into_dataset())
        }
        (None, None) => return Err(Error::InvalidArgument("one of --input or --synthetic is required".into())),
        (Some(_), Some(_)) => {
            return Err(Error::InvalidArgument("--input and --synthetic are mutually exclusive".into()))
        }
    };
    constraint.validate()?;
    let mut problem = Dataset::into_problem(dataset, constraint)?;
    if input.pow2_subsample {
        problem = problem.subsample_rows_pow2(mix_seed(ctx.seed, 0x5eed))?;
    }
    let column_scales = input.scale_columns.then(|| problem.normalize_columns());
    Ok(Loaded {
        name,
        problem,
        column_scales,
    })
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(p) if p != Path::new("-") => fs::write(p, text).map_err(|e| Error::io(p, e)),
        _ => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn emit_json<T: Serialize>(output: Option<&Path>, value: &T) -> Result<()> {
    emit(output, &(serde_json::to_string_pretty(value)? + "\n"))
}

/// Output of `hsketch solve`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub constraint: ConstraintSet,
    pub sketch: SketchSpec,
    pub x: Vec<f64>,
    pub objective: f64,
    /// `‖x − x_OPT‖_A / ‖x_OPT‖_A` for the final iterate, when a reference was computed.
    pub relative_error: Option<f64>,
    pub trace: IhsTrace,
}

/// Output of `hsketch exact`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactOutput {
    pub dataset: String,
    pub n: usize,
    pub d: usize,
    pub constraint: ConstraintSet,
    pub x: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

fn subsolver(ctx: &Context) -> SubSolverConfig {
    ctx.config.subsolver.unwrap_or_default()
}

fn solve(ctx: &Context, args: SolveArgs) -> Result<()> {
    let loaded = load_input(ctx, &args.input, args.constraint.constraint())?;
    let p = &loaded.problem;
    let method = args.sketch.method()?;
    let spec = method.spec(p.n(), p.d(), ctx.seed)?;
    let mut cfg = IhsConfig::new(spec);
    cfg.n_iters = args.iters.or(ctx.config.iters).unwrap_or(20);
    cfg.time_budget = args.time_budget;
    cfg.subsolver = subsolver(ctx);
    let reference = if args.no_reference {
        None
    } else {
        Some(exact_solve(p, &cfg.subsolver)?.x)
    };
    cfg.reference_solution = reference.clone();
    let (x, trace) = ihs_solve(p, &cfg).map_err(|f| {
        log::warn!("{} iterations completed before the failure", f.trace.records.len().saturating_sub(1));
        Error::from(f)
    })?;
    let relative_error = match &reference {
        Some(r) => {
            let denom = prediction_norm(p.a(), r)?;
            let e = prediction_norm(p.a(), &sub(&x, r))?;
            Some(if denom > 0.0 { e / denom } else { e })
        }
        None => None,
    };
    if let Some(path) = &args.csv {
        fs::write(path, trace_csv(&method, &trace)).map_err(|e| Error::io(path, e))?;
    }
    let out = SolveOutput {
        dataset: loaded.name.clone(),
        n: p.n(),
        d: p.d(),
        constraint: p.constraint(),
        sketch: spec,
        objective: p.objective(&x)?,
        x: loaded.unscale(x),
        relative_error,
        trace,
    };
    emit_json(args.output.as_deref(), &out)
}

fn trace_csv(method: &Method, trace: &IhsTrace) -> String {
    let mut out = String::from("method,gamma,s,trial,iteration,cum_seconds,error\n");
    for r in &trace.records {
        let err = r.prediction_error.map_or(String::new(), |e| e.to_string());
        let _ = writeln!(
            out,
            "\"{}\",{},{},0,{},{},{err}",
            method.label(),
            method.gamma,
            method.s,
            r.iteration,
            r.cum_seconds
        );
    }
    out
}

fn exact(ctx: &Context, args: ExactArgs) -> Result<()> {
    let loaded = load_input(ctx, &args.input, args.constraint.constraint())?;
    let p = &loaded.problem;
    let sol = exact_solve(p, &subsolver(ctx))?;
    if !sol.converged {
        log::warn!("exact solve stopped after {} iterations without converging", sol.iterations);
    }
    let out = ExactOutput {
        dataset: loaded.name.clone(),
        n: p.n(),
        d: p.d(),
        constraint: p.constraint(),
        objective: sol.objective,
        converged: sol.converged,
        iterations: sol.iterations,
        x: loaded.unscale(sol.x),
    };
    emit_json(args.output.as_deref(), &out)
}

fn parse_methods(items: &[String]) -> Result<Vec<Method>> {
    items.iter().map(|m| m.parse()).collect()
}

fn write_report_outputs(report: &BenchReport, output: Option<&Path>, csv: Option<&Path>) -> Result<()> {
    report.validate()?;
    if let Some(path) = csv {
        if path == Path::new("-") {
            emit(None, &report_to_csv(report))?;
        } else {
            write_csv(report, path)?;
        }
    }
    emit_json(output, report)
}

fn sketch_bench(ctx: &Context, args: SketchBenchArgs) -> Result<()> {
    let loaded = load_input(ctx, &args.input, ConstraintSet::Unconstrained)?;
    let methods = if !args.methods.is_empty() {
        parse_methods(&args.methods)?
    } else if let Some(m) = &ctx.config.methods {
        parse_methods(m)?
    } else {
        let mut out = Vec::new();
        for f in &args.families {
            let family: SketchFamily = f.parse()?;
            for &gamma in &args.gammas {
                let s = if family == SketchFamily::Sjlt { args.sjlt_s } else { 1 };
                out.push(Method { family, gamma, s });
            }
        }
        out
    };
    let opts = BaselineOptions {
        methods,
        trials: args.trials.or(ctx.config.trials).unwrap_or(10),
        seed: ctx.seed,
    };
    let report = run_sketch_baseline(&loaded.name, &loaded.problem, &opts)?;
    write_report_outputs(&report, args.output.as_deref(), args.csv.as_deref())
}

/// CountSketch(5), CountSketch(10), SJLT(5, s=4), SJLT(10, s=4), SRHT(10),
/// Gaussian(10).
pub fn default_convergence_methods() -> Vec<Method> {
    vec![
        Method::new(SketchFamily::CountSketch, 5.0),
        Method::new(SketchFamily::CountSketch, 10.0),
        Method::sjlt(5.0, 4),
        Method::sjlt(10.0, 4),
        Method::new(SketchFamily::Srht, 10.0),
        Method::new(SketchFamily::Gaussian, 10.0),
    ]
}

fn converge_bench(ctx: &Context, args: ConvergeBenchArgs) -> Result<()> {
    let loaded = load_input(ctx, &args.input, args.constraint.constraint())?;
    let methods = if !args.methods.is_empty() {
        parse_methods(&args.methods)?
    } else if let Some(m) = &ctx.config.methods {
        parse_methods(m)?
    } else {
        default_convergence_methods()
    };
    let mut opts = ConvergenceOptions::new(methods, args.trials.or(ctx.config.trials).unwrap_or(10), ctx.seed);
    opts.time_budget = args.time_budget.or(ctx.config.time_budget).unwrap_or(10.0);
    opts.max_iters = args.max_iters.or(ctx.config.max_iters).unwrap_or(200);
    opts.subsolver = subsolver(ctx);
    let report = run_convergence(&loaded.name, &loaded.problem, &opts)?;
    write_report_outputs(&report, args.output.as_deref(), args.csv.as_deref())
}

/// Embedding quality of one sketch draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingDraw {
    pub seed: u64,
    pub eps_low: f64,
    pub eps_high: f64,
    pub z1: f64,
    pub z2: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSummary {
    pub dataset: String,
    pub method: String,
    pub m: usize,
    pub max_distortion: f64,
    pub draws: Vec<EmbeddingDraw>,
}

/// Output of `hsketch diagnose`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnoseOutput {
    pub lemmas: LemmaReport,
    pub embedding: Option<EmbeddingSummary>,
}

fn diagnose(ctx: &Context, args: DiagnoseArgs) -> Result<()> {
    let trials = args.trials.or(ctx.config.trials).unwrap_or(2000);
    let lemmas = diagnose_lemmas(&SketchSpec::new(SketchFamily::CountSketch, args.m, ctx.seed), args.n, trials)?;

    let embedding = if args.input.input.is_some() || args.input.synthetic.is_some() {
        let loaded = load_input(ctx, &args.input, ConstraintSet::Unconstrained)?;
        let p = &loaded.problem;
        let method = args.sketch.method()?;
        let x_ls = exact_solve(p, &subsolver(ctx))?.x;
        let v = residual_direction(p, &x_ls)?;
        let mut draws = Vec::new();
        let mut m = 0;
        for k in 0..args.seeds as u64 {
            let seed = mix_seed(ctx.seed, k + 1);
            let spec = method.spec(p.n(), p.d(), seed)?;
            m = spec.m;
            let s = build_sketch(&spec, p.n())?;
            let dist = subspace_distortion(p.a(), &s)?;
            let (z1, z2) = estimate_z1_z2(p.a(), &s, &v)?;
            draws.push(EmbeddingDraw {
                seed,
                eps_low: dist.eps_low,
                eps_high: dist.eps_high,
                z1,
                z2,
                passed: dist.max() < args.max_distortion,
            });
        }
        Some(EmbeddingSummary {
            dataset: loaded.name.clone(),
            method: method.label(),
            m,
            max_distortion: args.max_distortion,
            draws,
        })
    } else {
        None
    };
    let out = DiagnoseOutput { lemmas, embedding };

    let table = diagnose_table(&out);
    match args.output.as_deref() {
        Some(p) if p == Path::new("-") => {
            eprint!("{table}");
            emit_json(None, &out)
        }
        Some(p) => {
            emit(None, &table)?;
            emit_json(Some(p), &out)
        }
        None => emit(None, &table),
    }
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn diagnose_table(out: &DiagnoseOutput) -> String {
    let l = &out.lemmas;
    let mut t = String::new();
    let _ = writeln!(t, "CountSketch lemmas (n={}, m={}, {} draws)", l.n, l.m, l.trials);
    let rows = &l.orthogonal_rows;
    let _ = writeln!(
        t,
        "  {}  SSᵀ diagonal with row counts      {} violating draws",
        pass(rows.violations == 0),
        rows.violations
    );
    let _ = writeln!(
        t,
        "  {}  one ±1 per column                 {} violating draws",
        pass(rows.column_violations == 0),
        rows.column_violations
    );
    let _ = writeln!(
        t,
        "  {}  E[SᵀS] = I                        max dev {:.4} <= {:.4}",
        pass(l.covariance.passed()),
        l.covariance.max_deviation,
        l.covariance.threshold
    );
    let _ = writeln!(
        t,
        "  {}  E[SSᵀ] = (n/m) I                  max dev {:.4} <= {:.4}",
        pass(l.row_gram.passed()),
        l.row_gram.max_deviation,
        l.row_gram.threshold
    );
    for tail in &l.tails {
        let _ = writeln!(
            t,
            "  {}  tail at eps={:<4}                 freq {:.4} <= {:.4}",
            pass(tail.passed()),
            tail.epsilon,
            tail.frequency,
            tail.bound + tail.slack
        );
    }
    if let Some(e) = &out.embedding {
        let ok = e.draws.iter().filter(|d| d.passed).count();
        let _ = writeln!(
            t,
            "Subspace embedding on {} with {} (m={}): {ok}/{} draws below {}",
            e.dataset,
            e.method,
            e.m,
            e.draws.len(),
            e.max_distortion
        );
        for d in &e.draws {
            let _ = writeln!(
                t,
                "  {}  seed {:>20}  eps_low {:.4}  eps_high {:.4}  z1 {:.4}  z2 {:.4}",
                pass(d.passed),
                d.seed,
                d.eps_low,
                d.eps_high,
                d.z1,
                d.z2
            );
        }
    }
    t
}

fn generate(ctx: &Context, args: GenerateArgs) -> Result<()> {
    let parsed = parse_synthetic(&args.synthetic, ctx.seed)?;
    let (p, truth) = generate_gaussian_design(&parsed.spec)?;
    match args.output.as_deref() {
        Some(path) if path != Path::new("-") => write_svmlight(p.a(), p.b(), path)?,
        _ => {
            let mut buf = Vec::new();
            crate::data::write_svmlight_to(p.a(), p.b(), &mut buf)
                .map_err(|e| Error::io("<stdout>", e))?;
            emit(None, &String::from_utf8_lossy(&buf))?;
        }
    }
    if let Some(path) = &args.truth {
        let text: String = truth.iter().map(|v| format!("{v}\n")).collect();
        fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}
