//! On-disk formats for view matrices and label files.
//!
//! A view matrix is either CSV (comma separated, no header, one sample per
//! row) or raw binary: two little-endian `u64` values (rows, cols) followed
//! by `rows * cols` little-endian `f64` values in row-major order. Binary is
//! selected by the `.bin` extension. Labels are one non-negative integer per
//! line.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::Matrix;

const BIN_EXT: &str = "bin";

fn is_binary(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == BIN_EXT)
}

pub fn read_matrix(path: &Path) -> Result<Matrix> {
    if is_binary(path) {
        read_matrix_bin(path)
    } else {
        read_matrix_csv(path)
    }
}

pub fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    if is_binary(path) {
        write_matrix_bin(path, m)
    } else {
        write_matrix_csv(path, m)
    }
}

fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(Error::data(
                    path,
                    Some(row),
                    format!("expected {c} columns, found {}", record.len()),
                ))
            }
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let value: f64 = cell.parse().map_err(|_| {
                Error::data(path, Some(row), format!("non-numeric cell {cell:?} in column {col}"))
            })?;
            data.push(value);
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| Error::data(path, None, e.to_string()))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map(|p| p.record() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::data(path, row, format!("{other:?}")),
    }
}

fn write_matrix_csv(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = String::with_capacity(m.len() * 20);
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_matrix_bin(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 16 {
        return Err(Error::data(path, None, "binary matrix header truncated"));
    }
    let rows = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes")) as usize;
    let cols = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::data(path, None, "binary matrix header overflows"))?;
    let body = &bytes[16..];
    if body.len() != expected {
        let complete_rows = if cols == 0 { 0 } else { body.len() / (8 * cols) };
        return Err(Error::data(
            path,
            Some(complete_rows),
            format!("expected {expected} payload bytes for {rows}x{cols}, found {}", body.len()),
        ));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::data(path, None, e.to_string()))
}

fn write_matrix_bin(path: &Path, m: &Matrix) -> Result<()> {
    let mut out = Vec::with_capacity(16 + 8 * m.len());
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(row, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| Error::data(path, Some(row), format!("invalid label {:?}", l.trim())))
        })
        .collect()
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = String::with_capacity(labels.len() * 3);
    for l in labels {
        buf.push_str(&l.to_string());
        buf.push('\n');
    }
    f.write_all(buf.as_bytes()).map_err(|e| Error::io(path, e))
}
