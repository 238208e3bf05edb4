//! Contingency tables, joint probability mass functions, and paired samples.
//!
//! Category labels are 1-based everywhere they appear in data (samples, CSV
//! files, contamination points); grid storage is row-major and 0-indexed.

use std::io::Read;

use rand::Rng;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Absolute tolerance on total-mass and marginal-normalization checks.
pub const MASS_TOL: f64 = 1e-12;

/// A paired sample of two categorical variables with declared category counts.
///
/// Labels are 1-based: `x` values lie in `1..=i_cats`, `y` in `1..=j_cats`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairedSample {
    x: Vec<usize>,
    y: Vec<usize>,
    i_cats: usize,
    j_cats: usize,
}

impl PairedSample {
    pub fn new(x: Vec<usize>, y: Vec<usize>, i_cats: usize, j_cats: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "label vectors differ in length: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        if i_cats == 0 || j_cats == 0 {
            return Err(Error::InvalidInput("category counts must be >= 1".into()));
        }
        for (pos, (&xi, &yi)) in x.iter().zip(&y).enumerate() {
            if xi < 1 || xi > i_cats {
                return Err(Error::InvalidInput(format!(
                    "x label {} at position {} outside 1..={}",
                    xi, pos, i_cats
                )));
            }
            if yi < 1 || yi > j_cats {
                return Err(Error::InvalidInput(format!(
                    "y label {} at position {} outside 1..={}",
                    yi, pos, j_cats
                )));
            }
        }
        Ok(Self { x, y, i_cats, j_cats })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn x_labels(&self) -> &[usize] {
        &self.x
    }

    pub fn y_labels(&self) -> &[usize] {
        &self.y
    }

    pub fn i_cats(&self) -> usize {
        self.i_cats
    }

    pub fn j_cats(&self) -> usize {
        self.j_cats
    }

    /// Replace the y labels, keeping declared ranges. Used by permutation tests.
    pub(crate) fn y_labels_mut(&mut self) -> &mut [usize] {
        &mut self.y
    }

    /// Parse a two-column integer CSV with the exact header `x,y`.
    ///
    /// Category counts are inferred as the maximum observed label in each
    /// column. Parse errors carry the 1-based line number.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        {
            let headers = rdr.headers().map_err(|e| csv_err(&e))?;
            let fields: Vec<&str> = headers.iter().map(|h| h.trim()).collect();
            if fields != ["x", "y"] {
                return Err(Error::CsvParse {
                    line: 1,
                    msg: format!("expected header \"x,y\", got \"{}\"", fields.join(",")),
                });
            }
        }
        let mut x = Vec::new();
        let mut y = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| csv_err(&e))?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            if record.len() != 2 {
                return Err(Error::CsvParse {
                    line,
                    msg: format!("expected 2 fields, got {}", record.len()),
                });
            }
            x.push(parse_label(record.get(0).unwrap_or(""), line)?);
            y.push(parse_label(record.get(1).unwrap_or(""), line)?);
        }
        if x.is_empty() {
            return Err(Error::CsvParse {
                line: 1,
                msg: "no data rows".into(),
            });
        }
        let i_cats = x.iter().copied().max().unwrap_or(1);
        let j_cats = y.iter().copied().max().unwrap_or(1);
        Self::new(x, y, i_cats, j_cats)
    }
}

fn parse_label(field: &str, line: u64) -> Result<usize> {
    let v: usize = field.trim().parse().map_err(|_| Error::CsvParse {
        line,
        msg: format!("expected a positive integer label, got \"{}\"", field),
    })?;
    if v == 0 {
        return Err(Error::CsvParse {
            line,
            msg: "labels are 1-based; got 0".into(),
        });
    }
    Ok(v)
}

fn csv_err(e: &csv::Error) -> Error {
    let line = match e.kind() {
        csv::ErrorKind::Utf8 { pos, .. } => pos.as_ref().map(|p| p.line()).unwrap_or(0),
        csv::ErrorKind::UnequalLengths { pos, .. } => pos.as_ref().map(|p| p.line()).unwrap_or(0),
        _ => 0,
    };
    Error::CsvParse {
        line,
        msg: e.to_string(),
    }
}

/// An I x J grid of nonnegative counts with cached margins.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<u64>,
    rows: usize,
    cols: usize,
    row_margins: Vec<u64>,
    col_margins: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    /// Build a table from a rectangular grid of counts.
    pub fn from_counts(grid: Vec<Vec<u64>>) -> Result<Self> {
        let rows = grid.len();
        if rows == 0 {
            return Err(Error::InvalidInput("table needs at least one row".into()));
        }
        let cols = grid[0].len();
        if cols == 0 {
            return Err(Error::InvalidInput("table needs at least one column".into()));
        }
        if grid.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged count grid".into()));
        }
        let counts: Vec<u64> = grid.into_iter().flatten().collect();
        Ok(Self::from_flat(counts, rows, cols))
    }

    fn from_flat(counts: Vec<u64>, rows: usize, cols: usize) -> Self {
        let mut row_margins = vec![0u64; rows];
        let mut col_margins = vec![0u64; cols];
        let mut total = 0u64;
        for i in 0..rows {
            for j in 0..cols {
                let c = counts[i * cols + j];
                row_margins[i] += c;
                col_margins[j] += c;
                total += c;
            }
        }
        Self {
            counts,
            rows,
            cols,
            row_margins,
            col_margins,
            total,
        }
    }

    /// Cross-tabulate a paired sample into its declared I x J grid.
    pub fn from_sample(sample: &PairedSample) -> Self {
        let rows = sample.i_cats();
        let cols = sample.j_cats();
        let mut counts = vec![0u64; rows * cols];
        for (&xi, &yi) in sample.x_labels().iter().zip(sample.y_labels()) {
            counts[(xi - 1) * cols + (yi - 1)] += 1;
        }
        Self::from_flat(counts, rows, cols)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Count in cell `(i, j)`, 0-indexed.
    pub fn count(&self, i: usize, j: usize) -> u64 {
        self.counts[i * self.cols + j]
    }

    pub fn row_margins(&self) -> &[u64] {
        &self.row_margins
    }

    pub fn col_margins(&self) -> &[u64] {
        &self.col_margins
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Maximum likelihood estimate of the joint pmf: cell counts over n.
    pub fn mle_pmf(&self) -> Result<JointPMF> {
        if self.total == 0 {
            return Err(Error::EmptyTable);
        }
        let n = self.total as f64;
        let probs = self.counts.iter().map(|&c| c as f64 / n).collect();
        Ok(JointPMF::from_flat_unchecked(probs, self.rows, self.cols))
    }
}

#[derive(Deserialize)]
struct PmfFile {
    probs: Vec<Vec<f64>>,
}

/// An I x J joint probability mass function with cached margins.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPMF {
    probs: Vec<f64>,
    rows: usize,
    cols: usize,
    row_margins: Vec<f64>,
    col_margins: Vec<f64>,
}

impl JointPMF {
    /// Build and validate a pmf: entries nonnegative, total mass 1 within
    /// [`MASS_TOL`].
    pub fn new(grid: Vec<Vec<f64>>) -> Result<Self> {
        let rows = grid.len();
        if rows == 0 {
            return Err(Error::InvalidInput("pmf needs at least one row".into()));
        }
        let cols = grid[0].len();
        if cols == 0 {
            return Err(Error::InvalidInput("pmf needs at least one column".into()));
        }
        if grid.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidInput("ragged pmf grid".into()));
        }
        let probs: Vec<f64> = grid.into_iter().flatten().collect();
        if probs.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::InvalidInput(
                "pmf entries must be finite and nonnegative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::InvalidInput(format!(
                "pmf mass {} differs from 1 by more than {:e}",
                total, MASS_TOL
            )));
        }
        Ok(Self::from_flat_unchecked(probs, rows, cols))
    }

    fn from_flat_unchecked(probs: Vec<f64>, rows: usize, cols: usize) -> Self {
        let mut row_margins = vec![0.0; rows];
        let mut col_margins = vec![0.0; cols];
        for i in 0..rows {
            for j in 0..cols {
                let p = probs[i * cols + j];
                row_margins[i] += p;
                col_margins[j] += p;
            }
        }
        Self {
            probs,
            rows,
            cols,
            row_margins,
            col_margins,
        }
    }

    /// Independence pmf from two marginal distributions: `p[i][j] = row[i] * col[j]`.
    pub fn product(row: &[f64], col: &[f64]) -> Result<Self> {
        for (name, m) in [("row", row), ("col", col)] {
            if m.is_empty() {
                return Err(Error::InvalidInput(format!("{} marginal is empty", name)));
            }
            if m.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{} marginal entries must be finite and nonnegative",
                    name
                )));
            }
            let s: f64 = m.iter().sum();
            if (s - 1.0).abs() > MASS_TOL {
                return Err(Error::InvalidInput(format!(
                    "{} marginal sums to {}, expected 1",
                    name, s
                )));
            }
        }
        let probs = row
            .iter()
            .flat_map(|&r| col.iter().map(move |&c| r * c))
            .collect();
        Ok(Self::from_flat_unchecked(probs, row.len(), col.len()))
    }

    /// Parse the JSON document `{"probs": [[...], ...]}` and validate.
    pub fn from_json_reader<R: Read>(reader: R) -> Result<Self> {
        let file: PmfFile = serde_json::from_reader(reader)?;
        Self::new(file.probs)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: PmfFile = serde_json::from_str(s)?;
        Self::new(file.probs)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Probability of cell `(i, j)`, 0-indexed.
    pub fn prob(&self, i: usize, j: usize) -> f64 {
        self.probs[i * self.cols + j]
    }

    pub fn row_margins(&self) -> &[f64] {
        &self.row_margins
    }

    pub fn col_margins(&self) -> &[f64] {
        &self.col_margins
    }

    /// Draw `n` i.i.d. pairs by inverse-CDF sampling over the flattened cells.
    ///
    /// Deterministic given the generator state; zero-probability cells are
    /// never produced.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> PairedSample {
        let mut cum = Vec::with_capacity(self.probs.len());
        let mut acc = 0.0;
        for &p in &self.probs {
            acc += p;
            cum.push(acc);
        }
        // Last positive-probability cell, for clamping u ~ 1.0 round-off.
        let last = self
            .probs
            .iter()
            .rposition(|&p| p > 0.0)
            .expect("validated pmf has positive mass");
        let mut x = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let u: f64 = rng.gen();
            let idx = cum.partition_point(|&c| c <= u).min(last);
            x.push(idx / self.cols + 1);
            y.push(idx % self.cols + 1);
        }
        PairedSample {
            x,
            y,
            i_cats: self.rows,
            j_cats: self.cols,
        }
    }
}
