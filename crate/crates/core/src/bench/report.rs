use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{BenchReport, Series, ERROR_FLOOR, SCHEMA_VERSION};
use crate::{Error, Result};

/// Writes pretty-printed JSON; refuses reports that fail validation.
pub fn write_report(report: &BenchReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    report.validate()?;
    let text = serde_json::to_string_pretty(report)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<BenchReport> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text).map_err(|e| match e {
        Error::Json(j) => Error::Report(format!("{}: {j}", path.display())),
        other => other,
    })
}

pub(crate) fn parse_report(text: &str) -> Result<BenchReport> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Report("missing schema_version".into()))?;
    if found != SCHEMA_VERSION as u64 {
        return Err(Error::SchemaVersion {
            found: found.min(u32::MAX as u64) as u32,
            expected: SCHEMA_VERSION,
        });
    }
    let report: BenchReport = serde_json::from_value(value)?;
    report.validate()?;
    Ok(report)
}

/// Flat table with the header `method,gamma,s,trial,iteration,cum_seconds,error`.
///
/// Convergence reports emit one row per trial and iteration with the floored
/// error. Baseline reports emit one row per trial with `iteration = 0`, the
/// apply time in `cum_seconds` and the relative Gram error in `error`.
pub fn report_to_csv(report: &BenchReport) -> String {
    let mut out = String::from("method,gamma,s,trial,iteration,cum_seconds,error\n");
    for series in &report.series {
        match series {
            Series::Baseline(b) => {
                let label = csv_field(&b.method);
                for (t, (e, secs)) in b.sketch_error.values.iter().zip(&b.sketch_seconds.values).enumerate() {
                    let _ = writeln!(out, "{label},{},{},{t},0,{secs},{}", b.gamma, b.s, e.max(ERROR_FLOOR));
                }
            }
            Series::Convergence(c) => {
                let label = csv_field(&c.method);
                for run in &c.runs {
                    for p in &run.points {
                        let _ = writeln!(
                            out,
                            "{label},{},{},{},{},{},{}",
                            c.gamma, c.s, run.trial, p.iteration, p.cum_seconds, p.error
                        );
                    }
                }
            }
        }
    }
    out
}

pub fn write_csv(report: &BenchReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, report_to_csv(report)).map_err(|e| Error::io(path, e))
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
