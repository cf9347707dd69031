use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::Matrix;
use crate::error::{Error, Result};

/// Parsed numeric CSV: features plus, optionally, the last column split off.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Option<Vec<String>>,
    pub features: Matrix,
    pub labels: Option<Vec<f64>>,
}

pub fn load_matrix_csv(path: impl AsRef<Path>, has_labels: bool) -> Result<CsvTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_matrix_csv(file, has_labels)
}

/// Parse comma-separated decimals.
///
/// A first line whose cells are all non-numeric is taken as a header. Every
/// other cell must be a finite decimal and every row must have the same
/// number of columns; violations report the 1-based line number.
pub fn parse_matrix_csv<R: Read>(reader: R, has_labels: bool) -> Result<CsvTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(None)
        .from_reader(reader);

    let mut header = None;
    let mut width: Option<usize> = None;
    let mut data = Vec::new();
    let mut rows = 0usize;
    let mut record = csv::StringRecord::new();
    let mut first = true;

    loop {
        let more = rdr.read_record(&mut record).map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        if !more {
            break;
        }
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            // blank line
            continue;
        }
        if first {
            first = false;
            if record.iter().all(|c| c.parse::<f64>().is_err()) {
                header = Some(record.iter().map(str::to_owned).collect());
                width = Some(record.len());
                continue;
            }
        }
        match width {
            Some(w) if w != record.len() => {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {w} columns, found {}", record.len()),
                })
            }
            None => width = Some(record.len()),
            _ => {}
        }
        for (col, cell) in record.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line,
                message: format!("column {}: not a number: {cell:?}", col + 1),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    message: format!("column {}: non-finite value {cell:?}", col + 1),
                });
            }
            data.push(v);
        }
        rows += 1;
    }

    if rows == 0 {
        return Err(Error::EmptyInput("CSV contains no data rows"));
    }
    let width = width.unwrap_or(0);
    if has_labels && width < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "a labeled table needs at least one feature column and a label column".into(),
        });
    }

    if !has_labels {
        return Ok(CsvTable {
            header,
            features: Matrix::new(rows, width, data)?,
            labels: None,
        });
    }
    let cols = width - 1;
    let mut feats = Vec::with_capacity(rows * cols);
    let mut labels = Vec::with_capacity(rows);
    for row in data.chunks_exact(width) {
        feats.extend_from_slice(&row[..cols]);
        labels.push(row[cols]);
    }
    Ok(CsvTable {
        header,
        features: Matrix::new(rows, cols, feats)?,
        labels: Some(labels),
    })
}

/// Write a matrix (and optional trailing label column) with shortest
/// round-trip float formatting.
pub fn write_matrix_csv(
    path: impl AsRef<Path>,
    matrix: &Matrix,
    labels: Option<&[f64]>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_rows(&mut w, matrix, labels).map_err(|e| Error::io(path, e))
}

fn write_rows<W: Write>(w: &mut W, matrix: &Matrix, labels: Option<&[f64]>) -> std::io::Result<()> {
    for (i, row) in matrix.iter_rows().enumerate() {
        let mut sep = "";
        for v in row {
            write!(w, "{sep}{v}")?;
            sep = ",";
        }
        if let Some(l) = labels {
            write!(w, "{sep}{}", l[i])?;
        }
        writeln!(w)?;
    }
    w.flush()
}
