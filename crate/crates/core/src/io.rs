//! Plain numeric CSV matrices: comma separated, one row per line, optional
//! leading header lines that start with `#`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut row = Vec::new();
        for (col, cell) in line.split(',').enumerate() {
            let cell = cell.trim();
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                line: line_no,
                column: col + 1,
                message: format!("cannot parse {cell:?} as a number"),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    line: line_no,
                    column: col + 1,
                });
            }
            row.push(value);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    column: row.len().min(w) + 1,
                    message: format!("expected {w} columns, found {}", row.len()),
                })
            }
            _ => {}
        }
        rows.push(row);
    }
    let ncols = width.unwrap_or(0);
    Ok(DMatrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_matrix_csv(&text)
}

/// Shortest round-trip formatting, so `parse(format(m)) == m` bit for bit.
pub fn format_matrix_csv(matrix: &DMatrix<f64>, header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        let _ = writeln!(out, "# {h}");
    }
    for row in matrix.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(path: &Path, matrix: &DMatrix<f64>, header: Option<&str>) -> Result<()> {
    fs::write(path, format_matrix_csv(matrix, header))?;
    Ok(())
}
