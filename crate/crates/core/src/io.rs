//! Point-cloud CSV input and output.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::datasets::{generate, GeneratorSpec};
use crate::error::{Error, Result};
use crate::measure::EmpiricalMeasure;
use crate::simplex::Point;

/// How to treat the last column of a headerless file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum WeightColumn {
    /// Weights only when a header names the last column `weight` or `w`.
    #[default]
    Auto,
    /// The last column holds weights.
    Last,
    /// No weight column.
    None,
}

fn is_weight_name(s: &str) -> bool {
    let s = s.trim();
    s.eq_ignore_ascii_case("weight") || s.eq_ignore_ascii_case("w")
}

/// Read a point cloud: `n` coordinate columns and an optional weight column.
/// A first row that does not parse as numbers is a header. Missing weights
/// default to `diam^d / count`.
pub fn read_csv<R: Read>(input: R, d: usize, weights: WeightColumn) -> Result<EmpiricalMeasure> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_reader(input);
    let mut records = Vec::new();
    for r in rdr.records() {
        let r = r?;
        if r.iter().all(|f| f.is_empty()) {
            continue;
        }
        records.push(r);
    }
    if records.is_empty() {
        return Err(Error::invalid("CSV input has no rows"));
    }
    let first_numeric = records[0].iter().all(|f| f.parse::<f64>().is_ok());
    let header: Option<Vec<String>> = (!first_numeric).then(|| records[0].iter().map(String::from).collect());
    let data = if header.is_some() { &records[1..] } else { &records[..] };
    let width = records[0].len();
    let weighted = match (weights, &header) {
        (WeightColumn::Last, _) => true,
        (WeightColumn::None, _) => false,
        (WeightColumn::Auto, Some(h)) => h.last().is_some_and(|s| is_weight_name(s)),
        (WeightColumn::Auto, None) => false,
    };
    let n = if weighted { width - 1 } else { width };
    if n == 0 {
        return Err(Error::invalid("CSV input has no coordinate columns"));
    }
    if data.is_empty() {
        return Err(Error::invalid("CSV input has a header but no data rows"));
    }
    let offset = if header.is_some() { 2 } else { 1 };
    let name = |c: usize| match &header {
        Some(h) => format!("`{}`", h[c]),
        None if weighted && c == n => "weight".to_string(),
        None => format!("x{c}"),
    };
    let mut points = Vec::with_capacity(data.len());
    let mut w = Vec::with_capacity(data.len());
    for (r, rec) in data.iter().enumerate() {
        let row = r + offset;
        if rec.len() != width {
            return Err(Error::invalid(format!("row {row}: {} fields, expected {width}", rec.len())));
        }
        let mut vals = Vec::with_capacity(width);
        for (c, f) in rec.iter().enumerate() {
            let v: f64 = f
                .parse()
                .map_err(|_| Error::invalid(format!("row {row}, column {} ({}): cannot parse `{f}` as a number", c + 1, name(c))))?;
            if !v.is_finite() {
                return Err(Error::invalid(format!("row {row}, column {} ({}): value is not finite", c + 1, name(c))));
            }
            vals.push(v);
        }
        if weighted {
            let wt = vals.pop().expect("width >= 2");
            if !(wt > 0.0) {
                return Err(Error::invalid(format!("row {row}, column {width} (weight): weight must be positive")));
            }
            w.push(wt);
        }
        points.push(Point::from(vals));
    }
    if weighted {
        EmpiricalMeasure::new(points, w, d)
    } else {
        EmpiricalMeasure::with_default_weights(points, d)
    }
}

pub fn read_csv_path(path: &Path, d: usize, weights: WeightColumn) -> Result<EmpiricalMeasure> {
    read_csv(File::open(path)?, d, weights)
}

/// Load a dataset: a `.json` generator descriptor or a CSV point cloud.
/// A descriptor's own `d` wins over the argument.
pub fn load_dataset(path: &Path, d: usize, weights: WeightColumn) -> Result<EmpiricalMeasure> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
        let text = std::fs::read_to_string(path)?;
        generate(&GeneratorSpec::from_json(&text)?)
    } else {
        read_csv_path(path, d, weights)
    }
}

/// Header `x0,..,x{n-1},weight` and one row per atom.
pub fn write_csv<W: Write>(mu: &EmpiricalMeasure, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..mu.ambient_dim()).map(|k| format!("x{k}")).collect();
    header.push("weight".into());
    w.write_record(&header)?;
    for (p, wt) in mu.points().iter().zip(mu.weights()) {
        let mut row: Vec<String> = p.coords().iter().map(|c| c.to_string()).collect();
        row.push(wt.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
