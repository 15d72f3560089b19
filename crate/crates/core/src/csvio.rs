//! Numeric CSV input and output.
//!
//! Files need a header row. An optional label column is read as categories
//! and mapped to 1, 2, … in order of first appearance.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{IcsError, Result};
use crate::matrix::Matrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    pub x: Matrix<T>,
    /// Names of the numeric columns.
    pub columns: Vec<String>,
    pub labels: Option<Vec<usize>>,
    /// Category of label g at position g−1.
    pub categories: Vec<String>,
}

fn parse_err(row: usize, column: usize, message: impl Into<String>) -> IcsError {
    IcsError::Parse {
        row,
        column,
        message: message.into(),
    }
}

/// Reads CSV text. Rows and columns in errors are 1-based with the header as row 1.
pub fn read_csv_from<T: Scalar, R: Read>(reader: R, label_column: Option<&str>) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(1, 0, e.to_string()))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(parse_err(1, 0, "missing header row"));
    }
    let label_idx = match label_column {
        None => None,
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| parse_err(1, 0, format!("no column named `{name}`")))?,
        ),
    };
    let width = header.len();
    let columns: Vec<String> = (0..width)
        .filter(|&j| Some(j) != label_idx)
        .map(|j| header[j].clone())
        .collect();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut categories: Vec<String> = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 2;
        let rec = rec.map_err(|e| parse_err(row, 0, e.to_string()))?;
        if rec.len() != width {
            return Err(parse_err(row, rec.len().min(width) + 1, format!("expected {width} fields, found {}", rec.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            let field = field.trim();
            if Some(j) == label_idx {
                let g = match categories.iter().position(|c| c == field) {
                    Some(g) => g,
                    None => {
                        categories.push(field.to_string());
                        categories.len() - 1
                    }
                };
                labels.push(g + 1);
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| parse_err(row, j + 1, format!("`{field}` is not a number")))?;
                if !v.is_finite() {
                    return Err(parse_err(row, j + 1, format!("`{field}` is not finite")));
                }
                values.push(T::lit(v));
            }
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(parse_err(2, 0, "no data rows"));
    }
    Ok(Dataset {
        x: Matrix::new(rows, columns.len(), values)?,
        columns,
        labels: label_idx.map(|_| labels),
        categories,
    })
}

pub fn read_csv<T: Scalar>(path: impl AsRef<Path>, label_column: Option<&str>) -> Result<Dataset<T>> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| IcsError::Io(format!("{}: {e}", path.as_ref().display())))?;
    read_csv_from(std::io::BufReader::new(file), label_column)
}

fn csv_err(e: csv::Error) -> IcsError {
    IcsError::Io(e.to_string())
}

/// Writes `x` with the given column names, plus an integer `label` column when labels are given.
/// Values use the shortest representation that reads back to the same number.
pub fn write_csv_to<T: Scalar, W: Write>(
    writer: W,
    columns: &[String],
    x: &Matrix<T>,
    labels: Option<&[usize]>,
) -> Result<()> {
    if columns.len() != x.cols() {
        return crate::error::validation(format!("{} names for {} columns", columns.len(), x.cols()));
    }
    if labels.is_some_and(|l| l.len() != x.rows()) {
        return crate::error::validation("label count differs from row count");
    }
    let mut w = csv::Writer::from_writer(writer);
    let mut head: Vec<&str> = columns.iter().map(String::as_str).collect();
    if labels.is_some() {
        head.push("label");
    }
    w.write_record(&head).map_err(csv_err)?;
    for i in 0..x.rows() {
        let mut rec: Vec<String> = x.row(i).iter().map(|v| v.to_string()).collect();
        if let Some(l) = labels {
            rec.push(l[i].to_string());
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<T: Scalar>(
    path: impl AsRef<Path>,
    columns: &[String],
    x: &Matrix<T>,
    labels: Option<&[usize]>,
) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())
        .map_err(|e| IcsError::Io(format!("{}: {e}", path.as_ref().display())))?;
    write_csv_to(std::io::BufWriter::new(file), columns, x, labels)
}

/// Column names `prefix1`, `prefix2`, ….
pub fn numbered_columns(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("{prefix}{j}")).collect()
}
