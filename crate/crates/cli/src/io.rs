//! CSV input and output. Series files have one row per time point and one
//! column per series.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use nalgebra::DMatrix;
use sobi::signal_model::TimeSeriesMatrix;

/// 17 significant digits, enough for an exact round trip.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads a numeric CSV into a matrix with the file's row layout. A first
/// line that does not parse as numbers is taken as a header and skipped.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("{}: malformed CSV", path.display()))?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => rows.push(values),
            Err(_) if line == 0 => continue,
            Err(e) => bail!("{}: line {}: {e}", path.display(), line + 1),
        }
    }
    let Some(width) = rows.first().map(Vec::len) else {
        bail!("{}: no numeric rows", path.display());
    };
    if let Some(i) = rows.iter().position(|r| r.len() != width) {
        bail!("{}: row {} has {} fields, expected {width}", path.display(), i + 1, rows[i].len());
    }
    Ok(DMatrix::from_fn(rows.len(), width, |r, c| rows[r][c]))
}

pub fn read_series(path: &Path) -> Result<TimeSeriesMatrix> {
    let m = read_matrix(path)?;
    Ok(TimeSeriesMatrix::new(m.transpose())?)
}

/// Writes `x` with time running down the rows. `header` names the columns
/// `{header}1, {header}2, ...`.
pub fn write_series<W: Write>(out: W, x: &TimeSeriesMatrix, header: Option<&str>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if let Some(prefix) = header {
        w.write_record((1..=x.p()).map(|j| format!("{prefix}{j}")))?;
    }
    let v = x.values();
    for t in 0..v.ncols() {
        w.write_record(v.column(t).iter().map(|&e| format_value(e)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_series_file(path: &Path, x: &TimeSeriesMatrix, header: Option<&str>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    write_series(BufWriter::new(file), x, header)
}

/// Opens `path` for writing, or stdout when no path is given.
pub fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}
