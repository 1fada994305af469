//! CSV exchange format for samples: the first row holds the grid abscissae,
//! every following row one curve.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fda::{Curve, FunctionalSample, Grid};

fn csv_error(line: u64, msg: impl Into<String>) -> Error {
    Error::Csv { line, msg: msg.into() }
}

fn parse_rows<R: Read>(reader: R) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_error(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(str::is_empty) {
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(k, field)| {
                let v: f64 = field
                    .parse()
                    .map_err(|_| csv_error(line, format!("field {} is not a number: '{field}'", k + 1)))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(csv_error(line, format!("field {} is not finite", k + 1)))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok(rows)
}

fn curves_from_rows(grid: &Arc<Grid>, rows: Vec<(u64, Vec<f64>)>) -> Result<Vec<Curve>> {
    rows.into_iter()
        .map(|(line, values)| {
            if values.len() != grid.len() {
                return Err(csv_error(
                    line,
                    format!("expected {} values, found {}", grid.len(), values.len()),
                ));
            }
            Curve::new(Arc::clone(grid), values)
        })
        .collect()
}

/// Reads a grid row followed by at least one curve row.
pub fn read_sample<R: Read>(reader: R) -> Result<FunctionalSample> {
    let mut rows = parse_rows(reader)?.into_iter();
    let (line, points) = rows.next().ok_or_else(|| csv_error(1, "missing grid row"))?;
    let grid = Arc::new(Grid::new(points).map_err(|e| csv_error(line, e.to_string()))?);
    let curves = curves_from_rows(&grid, rows.collect())?;
    if curves.is_empty() {
        return Err(Error::EmptySample);
    }
    FunctionalSample::new(grid, curves)
}

/// Reads curves in the sample format and checks their grid against `grid`.
pub fn read_curves_on<R: Read>(grid: &Arc<Grid>, reader: R) -> Result<Vec<Curve>> {
    let mut rows = parse_rows(reader)?.into_iter();
    let (line, points) = rows.next().ok_or_else(|| csv_error(1, "missing grid row"))?;
    let theirs = Grid::new(points).map_err(|e| csv_error(line, e.to_string()))?;
    if theirs.points() != grid.points() {
        return Err(Error::GridMismatch);
    }
    curves_from_rows(grid, rows.collect())
}

pub fn read_sample_file(path: impl AsRef<Path>) -> Result<FunctionalSample> {
    read_sample(std::fs::File::open(path)?)
}

fn write_row<W: Write>(out: &mut W, values: &[f64]) -> Result<()> {
    for (k, v) in values.iter().enumerate() {
        if k > 0 {
            out.write_all(b",")?;
        }
        write!(out, "{v}")?;
    }
    out.write_all(b"\n")?;
    Ok(())
}

/// Writes `curves` in the sample format; values round-trip exactly.
pub fn write_curves<W: Write>(grid: &Grid, curves: &[Curve], mut out: W) -> Result<()> {
    write_row(&mut out, grid.points())?;
    for c in curves {
        write_row(&mut out, c.values())?;
    }
    Ok(())
}

pub fn write_sample<W: Write>(sample: &FunctionalSample, out: W) -> Result<()> {
    write_curves(sample.grid(), sample.curves(), out)
}
