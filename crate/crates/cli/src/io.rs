//! CSV input and output.
//!
//! Every number written by this crate goes through [`fmt_f64`], which keeps 17
//! significant digits so that a load/write cycle is lossless.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use linmarg::Dataset64;
use nalgebra::{DMatrix, DVector};

use crate::error::{CliError, CliResult};

pub const DATASET_HEADER: [&str; 3] = ["x", "y", "sigma_y"];

/// `v` in scientific notation with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_error(path: &Path, line: u64, column: usize, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        line,
        column,
        message: message.into(),
    }
}

fn parse_number(path: &Path, line: u64, column: usize, field: &str) -> CliResult<f64> {
    field
        .parse::<f64>()
        .map_err(|_| parse_error(path, line, column, format!("cannot parse {field:?} as a number")))
}

/// Reads a dataset from a CSV file with header `x,y,sigma_y`.
pub fn load_dataset(path: &Path) -> CliResult<Dataset64> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| CliError::io(path, e))?;
    parse_dataset(path, &bytes)
}

pub fn parse_dataset(path: &Path, bytes: &[u8]) -> CliResult<Dataset64> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let names: Vec<&str> = headers.iter().map(|h| h.trim_start_matches('\u{feff}')).collect();
    if names != DATASET_HEADER {
        return Err(parse_error(
            path,
            1,
            1,
            format!("expected header x,y,sigma_y, found {}", names.join(",")),
        ));
    }
    let (mut x, mut y, mut s) = (Vec::new(), Vec::new(), Vec::new());
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let values = record
            .iter()
            .enumerate()
            .map(|(i, field)| parse_number(path, line, i + 1, field))
            .collect::<CliResult<Vec<f64>>>()?;
        x.push(values[0]);
        y.push(values[1]);
        s.push(values[2]);
    }
    Dataset64::new(DVector::from_vec(x), DVector::from_vec(y), DVector::from_vec(s))
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line());
    match e.kind() {
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => parse_error(
            path,
            line,
            (*len.min(expected_len) + 1) as usize,
            format!("expected {expected_len} fields, found {len}"),
        ),
        csv::ErrorKind::Utf8 { err, .. } => parse_error(path, line, err.field() + 1, "invalid UTF-8"),
        _ => parse_error(path, line, 1, e.to_string()),
    }
}

/// Writes a header row and numeric rows.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    write_records(
        path,
        header,
        rows.into_iter()
            .map(|row| row.as_ref().iter().map(|v| fmt_f64(*v)).collect::<Vec<_>>()),
    )
}

/// Writes a header row and pre-formatted rows.
pub fn write_records<I>(path: &Path, header: &[&str], rows: I) -> CliResult<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| CliError::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_dataset(path: &Path, data: &Dataset64) -> CliResult<()> {
    let rows = (0..data.len()).map(|i| [data.x()[i], data.y()[i], data.sigma_y()[i]]);
    write_table(path, &DATASET_HEADER, rows)
}

/// A comma-separated list of numbers, as given on the command line.
pub fn parse_list(flag: &str, text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Validation(format!("{flag}: cannot parse {:?} as a number", t.trim())))
        })
        .collect()
}

/// A square matrix stored as headerless CSV, one row per line.
pub fn load_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => CliError::io(path, io),
            other => CliError::Validation(format!("{}: {other:?}", path.display())),
        })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push(
            record
                .iter()
                .enumerate()
                .map(|(i, f)| parse_number(path, line, i + 1, f))
                .collect::<CliResult<_>>()?,
        );
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Validation(format!(
            "{}: expected a square matrix, found {n} rows",
            path.display()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}
