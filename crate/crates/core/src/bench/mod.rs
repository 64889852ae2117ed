//! Experiment harness and the versioned report format.
//!
//! Two experiments are supported: a sketch-quality baseline (relative Gram
//! error and apply time per family and projection ratio) and error-versus-time
//! convergence curves of the sketched iteration. Both produce a
//! [`BenchReport`], which is written as JSON and can be flattened to CSV with
//! the columns `method,gamma,s,trial,iteration,cum_seconds,error`.

mod report;
mod runner;

pub use report::{read_report, report_to_csv, write_csv, write_report};
pub use runner::{run_convergence, run_sketch_baseline, BaselineOptions, ConvergenceOptions};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sketch::{SketchFamily, SketchSpec};
use crate::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// Errors below this are reported as this value in the plotted columns.
pub const ERROR_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    SketchBaseline,
    Convergence,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub name: String,
    pub n: usize,
    pub d: usize,
    pub density: f64,
}

/// A sketch family at projection ratio `gamma`, i.e. `m = ⌈γ d⌉` (rounded up
/// to a multiple of `s` for SJLT).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Method {
    pub family: SketchFamily,
    pub gamma: f64,
    pub s: usize,
}

impl Method {
    pub fn new(family: SketchFamily, gamma: f64) -> Self {
        Self { family, gamma, s: 1 }
    }

    pub fn sjlt(gamma: f64, s: usize) -> Self {
        Self {
            family: SketchFamily::Sjlt,
            gamma,
            s,
        }
    }

    /// `CountSketch(10)`, `SJLT(10, s=4)`, `Exact`.
    pub fn label(&self) -> String {
        match self.family {
            SketchFamily::Identity => "Exact".to_string(),
            SketchFamily::Sjlt if self.s != 1 => format!("SJLT({}, s={})", self.gamma, self.s),
            f => format!("{f}({})", self.gamma),
        }
    }

    pub fn projection_dim(&self, n: usize, d: usize) -> usize {
        match self.family {
            SketchFamily::Identity => n,
            _ => {
                let m = ((self.gamma * d as f64).ceil() as usize).max(1);
                m.div_ceil(self.s.max(1)) * self.s.max(1)
            }
        }
    }

    pub fn spec(&self, n: usize, d: usize, seed: u64) -> Result<SketchSpec> {
        if self.family != SketchFamily::Identity && !(self.gamma > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be positive, got {}", self.gamma)));
        }
        let spec = SketchSpec {
            family: self.family,
            m: self.projection_dim(n, d),
            s: self.s,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `family:gamma[:s]`, e.g. `countsketch:10` or `sjlt:5:4`; `exact` alone
/// selects the identity sketch.
impl FromStr for Method {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let family: SketchFamily = parts[0].parse()?;
        let bad = || Error::InvalidArgument(format!("malformed method {text:?}, expected family:gamma[:s]"));
        if family == SketchFamily::Identity {
            return if parts.len() == 1 { Ok(Method::new(family, 1.0)) } else { Err(bad()) };
        }
        let gamma: f64 = parts.get(1).ok_or_else(bad)?.parse().map_err(|_| bad())?;
        let s: usize = match parts.get(2) {
            Some(v) => v.parse().map_err(|_| bad())?,
            None => 1,
        };
        if parts.len() > 3 || (s != 1 && family != SketchFamily::Sjlt) {
            return Err(bad());
        }
        Ok(Method { family, gamma, s })
    }
}

/// Per-trial values with their mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub values: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    pub fn from_values(values: Vec<f64>) -> Self {
        let (mean, std) = mean_std(&values);
        Self { values, mean, std }
    }
}

pub(crate) fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSeries {
    pub method: String,
    pub family: SketchFamily,
    pub gamma: f64,
    pub s: usize,
    pub m: usize,
    pub trials: usize,
    /// `‖AᵀSᵀSA − AᵀA‖_F / ‖AᵀA‖_F`.
    pub sketch_error: Summary,
    /// Time to form `SA` from a realised operator.
    pub sketch_seconds: Summary,
    /// Time to draw the operator, reported separately.
    pub build_seconds: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub iteration: usize,
    pub cum_seconds: f64,
    /// `max(raw_error, ERROR_FLOOR)`.
    pub error: f64,
    /// Relative prediction error `‖xᵗ − x_OPT‖_A / ‖x_OPT‖_A`.
    pub raw_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRun {
    pub trial: usize,
    pub seed: u64,
    pub points: Vec<ConvergencePoint>,
}

/// Mean over the trials that reached a given iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanPoint {
    pub iteration: usize,
    pub count: usize,
    pub mean_cum_seconds: f64,
    pub mean_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSeries {
    pub method: String,
    pub family: SketchFamily,
    pub gamma: f64,
    pub s: usize,
    pub m: usize,
    pub trials: usize,
    pub runs: Vec<ConvergenceRun>,
    pub mean: Vec<MeanPoint>,
}

impl ConvergenceSeries {
    /// Averages raw errors and times per iteration index.
    pub fn aggregate(runs: &[ConvergenceRun]) -> Vec<MeanPoint> {
        let len = runs.iter().map(|r| r.points.len()).max().unwrap_or(0);
        (0..len)
            .map(|i| {
                let pts: Vec<&ConvergencePoint> = runs.iter().filter_map(|r| r.points.get(i)).collect();
                let k = pts.len() as f64;
                MeanPoint {
                    iteration: i,
                    count: pts.len(),
                    mean_cum_seconds: pts.iter().map(|p| p.cum_seconds).sum::<f64>() / k,
                    mean_error: pts.iter().map(|p| p.raw_error).sum::<f64>() / k,
                }
            })
            .collect()
    }

    /// Final raw error of each trial.
    pub fn final_errors(&self) -> Vec<f64> {
        self.runs
            .iter()
            .map(|r| r.points.last().map_or(f64::NAN, |p| p.raw_error))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Series {
    Baseline(BaselineSeries),
    Convergence(ConvergenceSeries),
}

impl Series {
    pub fn method(&self) -> &str {
        match self {
            Series::Baseline(s) => &s.method,
            Series::Convergence(s) => &s.method,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub threads: usize,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub seed: u64,
    pub version: String,
}

impl Environment {
    pub fn capture(seed: u64) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            threads: rayon::current_num_threads(),
            timestamp,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    pub dataset: DatasetInfo,
    pub series: Vec<Series>,
    pub environment: Environment,
}

impl BenchReport {
    /// Non-empty series of the matching kind, trials ≥ 1, times ≥ 0.
    pub fn validate(&self) -> Result<()> {
        if self.series.is_empty() {
            return Err(Error::Report("report has no series".into()));
        }
        let bad_time = |t: f64| !(t >= 0.0);
        for s in &self.series {
            let ok = match (self.kind, s) {
                (ExperimentKind::SketchBaseline, Series::Baseline(b)) => {
                    b.trials >= 1
                        && !b.sketch_seconds.values.iter().any(|&t| bad_time(t))
                        && !b.build_seconds.values.iter().any(|&t| bad_time(t))
                }
                (ExperimentKind::Convergence, Series::Convergence(c)) => {
                    c.trials >= 1
                        && c.runs.iter().all(|r| r.points.iter().all(|p| !bad_time(p.cum_seconds)))
                }
                _ => {
                    return Err(Error::Report(format!(
                        "series {:?} does not match report kind {:?}",
                        s.method(),
                        self.kind
                    )))
                }
            };
            if !ok {
                return Err(Error::Report(format!(
                    "series {:?} has no trials or a negative time",
                    s.method()
                )));
            }
        }
        Ok(())
    }
}
