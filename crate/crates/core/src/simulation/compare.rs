//! Column-wise comparison of two diagnostics files or two field files.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::diagnostics::{read_table, Table};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ColumnDiff {
    pub name: String,
    pub linf: f64,
    pub l2: f64,
}

/// Outcome of comparing two output files.
#[derive(Clone, Debug, PartialEq)]
pub enum Comparison {
    /// Per-column differences of diagnostics or rank tables.
    Table(Vec<ColumnDiff>),
    /// Largest pointwise difference of the electric field over all samples,
    /// then per component.
    Field { linf: f64, per_component: Vec<f64> },
}

fn same_time_axis(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::TimeAxis(format!("{} rows vs {} rows", a.len(), b.len())));
    }
    for (x, y) in a.iter().zip(b) {
        if (x - y).abs() > 1e-9 * x.abs().max(1.0) {
            return Err(Error::TimeAxis(format!("time {x} vs {y}")));
        }
    }
    Ok(())
}

/// Differences of every column present in both tables, except `time`.
pub fn compare_tables(a: &Table, b: &Table) -> Result<Vec<ColumnDiff>> {
    let ta = a.column("time").ok_or_else(|| Error::Parse("first file has no time column".into()))?;
    let tb = b.column("time").ok_or_else(|| Error::Parse("second file has no time column".into()))?;
    same_time_axis(&ta, &tb)?;
    Ok(a.columns
        .iter()
        .filter(|c| c.as_str() != "time")
        .filter_map(|c| {
            let (x, y) = (a.column(c)?, b.column(c)?);
            let diffs: Vec<f64> = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).collect();
            Some(ColumnDiff {
                name: c.clone(),
                linf: diffs.iter().fold(0.0, |m, d| m.max(*d)),
                l2: diffs.iter().map(|d| d * d).sum::<f64>().sqrt(),
            })
        })
        .collect())
}

/// One record of a field file: time, component (from 1), values.
pub type FieldSample = (f64, usize, Vec<f64>);

pub fn read_efield(input: impl Read) -> Result<Vec<FieldSample>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {s:?}")));
        if rec.len() < 2 {
            return Err(Error::Parse("field record needs time and component".into()));
        }
        let values = rec.iter().skip(2).map(num).collect::<Result<Vec<_>>>()?;
        out.push((num(&rec[0])?, num(&rec[1])? as usize, values));
    }
    Ok(out)
}

pub fn compare_efield(a: &[FieldSample], b: &[FieldSample]) -> Result<Comparison> {
    let ta: Vec<f64> = a.iter().map(|s| s.0).collect();
    let tb: Vec<f64> = b.iter().map(|s| s.0).collect();
    same_time_axis(&ta, &tb)?;
    let mut per_component: Vec<f64> = Vec::new();
    for (x, y) in a.iter().zip(b) {
        if x.1 != y.1 || x.2.len() != y.2.len() {
            return Err(Error::ShapeMismatch(format!("field record at t = {} differs in layout", x.0)));
        }
        let worst = x.2.iter().zip(&y.2).fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        if per_component.len() < x.1 {
            per_component.resize(x.1, 0.0);
        }
        per_component[x.1 - 1] = per_component[x.1 - 1].max(worst);
    }
    Ok(Comparison::Field {
        linf: per_component.iter().fold(0.0, |m, d| m.max(*d)),
        per_component,
    })
}

fn is_field_file(path: &Path) -> Result<bool> {
    let mut first = String::new();
    BufReader::new(File::open(path)?).read_line(&mut first)?;
    Ok(first.starts_with("# ttsl electric field"))
}

/// Compares two diagnostics, rank or field files written by a run.
pub fn compare_files(a: &Path, b: &Path) -> Result<Comparison> {
    match (is_field_file(a)?, is_field_file(b)?) {
        (true, true) => compare_efield(&read_efield(File::open(a)?)?, &read_efield(File::open(b)?)?),
        (false, false) => Ok(Comparison::Table(compare_tables(
            &read_table(File::open(a)?)?,
            &read_table(File::open(b)?)?,
        )?)),
        _ => Err(Error::Parse("cannot compare a field file with a table".into())),
    }
}
