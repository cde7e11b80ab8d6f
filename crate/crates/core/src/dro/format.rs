//! File formats for training data and support sets.
//!
//! Sample sets are CSV with a header row naming the error components and one
//! row per sample. Support polytopes are a small text block:
//!
//! ```text
//! support-polytope 1
//! dim 2
//! # H row entries, then "<=", then d
//! 1 0 <= 0.5
//! -1 0 <= 0.5
//! ```
//!
//! A block with no rows describes unbounded support.

use std::io::{Read, Write};
use std::path::Path;

use super::{SampleSet, SupportPolytope};
use crate::error::{Error, Result};

pub const SUPPORT_HEADER: &str = "support-polytope 1";

pub fn read_samples<R: Read>(reader: R) -> Result<SampleSet> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let names: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|_| Error::Data(format!("sample row {}: '{f}' is not a number", i + 1))))
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    SampleSet::with_names(names, rows)
}

pub fn write_samples<W: Write>(samples: &SampleSet, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(samples.names())?;
    for r in samples.rows() {
        w.write_record(r.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_samples(path: &Path) -> Result<SampleSet> {
    read_samples(std::fs::File::open(path)?)
}

pub fn save_samples(samples: &SampleSet, path: &Path) -> Result<()> {
    write_samples(samples, std::fs::File::create(path)?)
}

pub fn support_to_text(support: &SupportPolytope) -> String {
    let mut out = format!("{SUPPORT_HEADER}\ndim {}\n", support.dim());
    for (row, d) in support.h().iter().zip(support.d()) {
        let coefs: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&format!("{} <= {d:?}\n", coefs.join(" ")));
    }
    out
}

pub fn support_from_text(text: &str, file: &str) -> Result<SupportPolytope> {
    let err = |line: usize, message: String| Error::Parse { file: file.to_string(), section: "support".into(), line, message };
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    match lines.next() {
        Some((_, l)) if l == SUPPORT_HEADER => {}
        Some((n, l)) => return Err(err(n, format!("expected '{SUPPORT_HEADER}', found '{l}'"))),
        None => return Err(err(0, "empty support block".into())),
    }
    let dim = match lines.next() {
        Some((n, l)) => l
            .strip_prefix("dim ")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| err(n, format!("expected 'dim <n>', found '{l}'")))?,
        None => return Err(err(0, "missing 'dim' line".into())),
    };

    let mut h = Vec::new();
    let mut d = Vec::new();
    for (n, l) in lines {
        let (lhs, rhs) = l.split_once("<=").ok_or_else(|| err(n, "row needs '<='".into()))?;
        let row = lhs
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| err(n, format!("'{t}' is not a number"))))
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != dim {
            return Err(err(n, format!("row has {} coefficients, expected {dim}", row.len())));
        }
        let rhs = rhs.trim().parse::<f64>().map_err(|_| err(n, format!("'{}' is not a number", rhs.trim())))?;
        h.push(row);
        d.push(rhs);
    }
    SupportPolytope::new(dim, h, d)
}
