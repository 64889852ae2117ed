//! svmlight/libsvm and CSV ingestion.
//!
//! svmlight lines look like
//!
//! ```text
//! <label> <index>:<value> <index>:<value> ... [# comment]
//! ```
//!
//! with 1-based, strictly increasing feature indices. Labels become the
//! regression target `b`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DataMatrix, Dataset, DenseMatrix, SparseMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default)]
pub struct SvmlightOptions {
    /// Feature count; defaults to the largest index seen.
    pub n_features: Option<usize>,
}

pub fn load_svmlight(path: impl AsRef<Path>, opts: SvmlightOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);

    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut row_offsets = vec![0usize];
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut max_index = 0usize;

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let data = match line.find('#') {
            Some(pos) => &line[..pos],
            None => &line[..],
        };
        let mut tokens = data.split_whitespace();
        let Some(label_tok) = tokens.next() else {
            continue;
        };
        let label: f64 = label_tok
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad label {label_tok:?}")))?;
        if !label.is_finite() {
            return Err(parse_err(lineno, format!("non-finite label {label_tok:?}")));
        }

        let mut prev: Option<usize> = None;
        for tok in tokens {
            let (idx_s, val_s) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(lineno, format!("expected index:value, got {tok:?}")))?;
            if idx_s == "qid" {
                continue;
            }
            let idx: usize = idx_s
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad feature index {idx_s:?}")))?;
            if idx == 0 {
                return Err(parse_err(lineno, "feature indices are 1-based".into()));
            }
            if prev.is_some_and(|p| idx <= p) {
                return Err(parse_err(
                    lineno,
                    format!("feature index {idx} does not increase"),
                ));
            }
            prev = Some(idx);
            let val: f64 = val_s
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad feature value {val_s:?}")))?;
            if !val.is_finite() {
                return Err(parse_err(lineno, format!("non-finite value {val_s:?}")));
            }
            max_index = max_index.max(idx);
            if val != 0.0 {
                col_indices.push(idx - 1);
                values.push(val);
            }
        }
        labels.push(label);
        row_offsets.push(values.len());
    }

    if labels.is_empty() {
        return Err(Error::NoRows {
            path: path.to_path_buf(),
        });
    }
    let n_cols = match opts.n_features {
        Some(d) if d < max_index => {
            return Err(Error::InvalidArgument(format!(
                "feature count {d} is smaller than the largest index {max_index} in {}",
                path.display()
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    let a = SparseMatrix::new(labels.len(), n_cols, row_offsets, col_indices, values)?;
    Dataset::new(a, labels)
}

/// Writes `(A, b)` in svmlight format. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_svmlight(a: &DataMatrix, b: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if b.len() != a.n_rows() {
        return Err(Error::DimensionMismatch(format!(
            "target has length {}, matrix has {} rows",
            b.len(),
            a.n_rows()
        )));
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_svmlight_to(a, b, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn write_svmlight_to(a: &DataMatrix, b: &[f64], w: &mut impl Write) -> std::io::Result<()> {
    for (i, label) in b.iter().enumerate() {
        write!(w, "{label}")?;
        match a {
            DataMatrix::Sparse(m) => {
                let (cols, vals) = m.row(i);
                for (&c, &v) in cols.iter().zip(vals) {
                    write!(w, " {}:{v}", c + 1)?;
                }
            }
            DataMatrix::Dense(m) => {
                for (c, &v) in m.row(i).iter().enumerate() {
                    if v != 0.0 {
                        write!(w, " {}:{v}", c + 1)?;
                    }
                }
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// CSV with `b` in the first column and the dense row of `A` after it. A
/// header line is detected when its first field does not parse as a number.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut b = Vec::new();
    let mut values = Vec::new();
    let mut width: Option<usize> = None;
    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if width.is_none() && b.is_empty() && fields[0].parse::<f64>().is_err() {
            continue;
        }
        if fields.len() < 2 {
            return Err(parse_err(lineno, "need a target and at least one feature".into()));
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(parse_err(
                    lineno,
                    format!("expected {w} fields, found {}", fields.len()),
                ))
            }
            _ => {}
        }
        for (k, f) in fields.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| parse_err(lineno, format!("bad number {f:?} in field {}", k + 1)))?;
            if k == 0 {
                b.push(v);
            } else {
                values.push(v);
            }
        }
    }
    let Some(width) = width else {
        return Err(Error::NoRows {
            path: path.to_path_buf(),
        });
    };
    let a = DenseMatrix::new(b.len(), width - 1, values)?;
    Dataset::new(a, b)
}
