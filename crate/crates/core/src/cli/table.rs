//! Numeric table files: whitespace-separated text, or raw little-endian
//! f64 with a JSON shape sidecar at `<path>.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Text,
    F64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Shape {
    rows: usize,
    cols: usize,
    dtype: String,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Parse text rows; blank lines and lines starting with `#` are skipped.
pub fn parse_text(text: &str) -> Result<DMatrix<f64>, CliError> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let before = values.len();
        for (col, tok) in line.split_whitespace().enumerate() {
            let v: f64 = tok.parse().map_err(|_| {
                CliError::Input(format!(
                    "line {}, column {}: cannot parse {tok:?} as a number",
                    lineno + 1,
                    col + 1
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Input(format!(
                    "line {}, column {}: non-finite value {tok}",
                    lineno + 1,
                    col + 1
                )));
            }
            values.push(v);
        }
        let width = values.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(CliError::Input(format!(
                    "line {}: expected {c} columns, found {width}",
                    lineno + 1
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| CliError::Input("table has no data rows".into()))?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

/// Shortest representation that parses back to the same f64.
pub fn format_value(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

pub fn format_text(data: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in data.row_iter() {
        let mut first = true;
        for v in row.iter() {
            if !first {
                out.push(' ');
            }
            first = false;
            out.push_str(&format_value(*v));
        }
        out.push('\n');
    }
    out
}

pub fn read_table(path: &Path, format: TableFormat) -> Result<DMatrix<f64>, CliError> {
    let io_err = |p: &Path, e: std::io::Error| CliError::Input(format!("{}: {e}", p.display()));
    match format {
        TableFormat::Text => {
            let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
            parse_text(&text).map_err(|e| match e {
                CliError::Input(m) => CliError::Input(format!("{}: {m}", path.display())),
                other => other,
            })
        }
        TableFormat::F64 => {
            let side = sidecar(path);
            let shape: Shape = serde_json::from_str(
                &fs::read_to_string(&side).map_err(|e| io_err(&side, e))?,
            )
            .map_err(|e| CliError::Input(format!("{}: {e}", side.display())))?;
            if shape.dtype != "f64le" {
                return Err(CliError::Input(format!(
                    "{}: unsupported dtype {:?}",
                    side.display(),
                    shape.dtype
                )));
            }
            let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
            if bytes.len() != shape.rows * shape.cols * 8 {
                return Err(CliError::Input(format!(
                    "{}: expected {} bytes for {}x{} f64, found {}",
                    path.display(),
                    shape.rows * shape.cols * 8,
                    shape.rows,
                    shape.cols,
                    bytes.len()
                )));
            }
            let values: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
                return Err(CliError::Input(format!(
                    "{}: non-finite value at row {}, column {}",
                    path.display(),
                    pos / shape.cols + 1,
                    pos % shape.cols + 1
                )));
            }
            Ok(DMatrix::from_row_slice(shape.rows, shape.cols, &values))
        }
    }
}

pub fn write_table(path: &Path, data: &DMatrix<f64>, format: TableFormat) -> Result<(), CliError> {
    let io_err = |p: &Path, e: std::io::Error| CliError::Output(format!("{}: {e}", p.display()));
    match format {
        TableFormat::Text => fs::write(path, format_text(data)).map_err(|e| io_err(path, e)),
        TableFormat::F64 => {
            let mut bytes = Vec::with_capacity(data.len() * 8);
            for row in data.row_iter() {
                for v in row.iter() {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
            fs::write(path, bytes).map_err(|e| io_err(path, e))?;
            let shape = Shape {
                rows: data.nrows(),
                cols: data.ncols(),
                dtype: "f64le".into(),
            };
            let mut json = serde_json::to_string(&shape).expect("shape serialises");
            let _ = writeln!(json);
            let side = sidecar(path);
            fs::write(&side, json).map_err(|e| io_err(&side, e))
        }
    }
}
