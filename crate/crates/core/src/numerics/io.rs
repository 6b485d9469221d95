//! `SRCRMAT1` binary matrices and small CSV matrices.
//!
//! Binary layout: 8-byte magic `SRCRMAT1`, `u32` LE rows, `u32` LE cols, then
//! `rows * cols` little-endian `f32` values in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use super::{Matrix, NumericsError};
use crate::scalar::Scalar;

pub const MATRIX_MAGIC: &[u8; 8] = b"SRCRMAT1";
/// Largest dimension accepted for CSV matrices.
pub const MAX_CSV_DIM: usize = 64;

pub fn read_srcrmat<T: Scalar, R: Read>(mut reader: R) -> Result<Matrix<T>, NumericsError> {
    let mut header = [0u8; 16];
    reader
        .read_exact(&mut header)
        .map_err(|_| NumericsError::Format("truncated header".into()))?;
    if &header[..8] != MATRIX_MAGIC {
        return Err(NumericsError::Format("bad magic".into()));
    }
    let rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    if payload.len() != rows * cols * 4 {
        return Err(NumericsError::Format(format!(
            "expected {} payload bytes for {rows}x{cols}, found {}",
            rows * cols * 4,
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|b| T::lit(f32::from_le_bytes(b.try_into().unwrap()) as f64))
        .collect();
    Matrix::new(rows, cols, data)
}

/// Narrows entries to `f32` on write.
pub fn write_srcrmat<T: Scalar, W: Write>(
    m: &Matrix<T>,
    mut writer: W,
) -> Result<(), NumericsError> {
    let rows =
        u32::try_from(m.rows()).map_err(|_| NumericsError::Format("too many rows".into()))?;
    let cols =
        u32::try_from(m.cols()).map_err(|_| NumericsError::Format("too many cols".into()))?;
    let mut buf = Vec::with_capacity(16 + m.as_slice().len() * 4);
    buf.extend_from_slice(MATRIX_MAGIC);
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for v in m.as_slice() {
        buf.extend_from_slice(&(v.to_f64_lossy() as f32).to_le_bytes());
    }
    writer.write_all(&buf)?;
    Ok(())
}

/// One row per line, shortest round-trip decimals.
pub fn write_matrix_csv<T: Scalar, W: Write>(
    m: &Matrix<T>,
    mut writer: W,
) -> Result<(), NumericsError> {
    let mut out = String::new();
    for r in 0..m.rows() {
        let cells: Vec<String> = m
            .row(r)
            .iter()
            .map(|v| v.to_f64_lossy().to_string())
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    writer.write_all(out.as_bytes())?;
    Ok(())
}

/// One row per line, comma-separated decimals. Blank lines are skipped.
pub fn read_matrix_csv<T: Scalar>(text: &str) -> Result<Matrix<T>, NumericsError> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|cell| {
                cell.trim().parse::<f64>().map(T::lit).map_err(|e| {
                    NumericsError::Format(format!("line {}: {cell:?}: {e}", lineno + 1))
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    let m = Matrix::from_rows(&rows)?;
    if m.rows() > MAX_CSV_DIM || m.cols() > MAX_CSV_DIM {
        return Err(NumericsError::Format(format!(
            "CSV matrices are limited to {MAX_CSV_DIM}x{MAX_CSV_DIM}, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    Ok(m)
}

/// Dispatch on extension: `.csv` is text, anything else is `SRCRMAT1`.
pub fn read_matrix<T: Scalar>(path: &Path) -> Result<Matrix<T>, NumericsError> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        read_matrix_csv(&std::fs::read_to_string(path)?)
    } else {
        read_srcrmat(std::fs::File::open(path)?)
    }
}
