use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::linalg::Mat;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    /// Comma-separated decimal rows.
    Csv,
    /// `u64` rows, `u64` cols, then row-major `f64`, all little-endian.
    RawF64,
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(MatrixFormat::Csv),
            "raw_f64" => Ok(MatrixFormat::RawF64),
            other => Err(Error::InvalidArgument(format!(
                "unknown matrix format {other:?} (expected csv or raw_f64)"
            ))),
        }
    }
}

/// Parses CSV text. Rows and columns in errors are 1-based; blank lines are
/// skipped.
pub fn parse_csv(text: &str) -> Result<Mat> {
    let mut values = Vec::new();
    let mut width = None;
    let mut rows = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = lineno + 1;
        let mut count = 0;
        for (col, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row,
                column: col + 1,
                message: format!("{:?} is not a number", field.trim()),
            })?;
            values.push(v);
            count += 1;
        }
        match width {
            None => width = Some(count),
            Some(w) if w != count => {
                return Err(Error::Parse {
                    row,
                    column: count.min(w) + 1,
                    message: format!("row has {count} fields, expected {w}"),
                })
            }
            Some(_) => {}
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    Ok(Mat::from_row_slice(rows, cols, &values))
}

pub fn read_raw_f64(bytes: &[u8]) -> Result<Mat> {
    if bytes.len() < 16 {
        return Err(Error::Shape(format!(
            "raw header needs 16 bytes, got {}",
            bytes.len()
        )));
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let body = &bytes[16..];
    if rows.checked_mul(cols).and_then(|n| n.checked_mul(8)) != Some(body.len() as u64) {
        return Err(Error::Shape(format!(
            "header declares {rows}x{cols} but payload has {} bytes",
            body.len()
        )));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Mat::from_row_slice(rows as usize, cols as usize, &values))
}

pub fn write_raw_f64(m: &Mat) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * m.len());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn load_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<Mat> {
    let path = path.as_ref();
    match format {
        MatrixFormat::Csv => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            parse_csv(&text)
        }
        MatrixFormat::RawF64 => {
            let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
            read_raw_f64(&bytes)
        }
    }
}

pub fn save_matrix(path: impl AsRef<Path>, m: &Mat, format: MatrixFormat) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        MatrixFormat::Csv => {
            let mut text = String::new();
            for i in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|j| format!("{:?}", m[(i, j)])).collect();
                text.push_str(&row.join(","));
                text.push('\n');
            }
            text.into_bytes()
        }
        MatrixFormat::RawF64 => write_raw_f64(m),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
