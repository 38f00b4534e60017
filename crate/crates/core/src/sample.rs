use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Raw bivariate observations `(x_i, y_i)` in their original order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pairs: Vec<(f64, f64)>,
}

impl Sample {
    /// Fails on an empty list or on any non-finite coordinate.
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::EmptySample("sample has no observations".into()));
        }
        if let Some(i) = pairs.iter().position(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::input(format!(
                "observation {i} is not finite: ({}, {})",
                pairs[i].0, pairs[i].1
            )));
        }
        Ok(Self { pairs })
    }

    pub fn from_columns(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::input(format!(
                "column lengths differ: {} vs {}",
                x.len(),
                y.len()
            )));
        }
        Self::new(x.iter().copied().zip(y.iter().copied()).collect())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(f64, f64)] {
        &self.pairs
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|p| p.0)
    }

    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.pairs.iter().map(|p| p.1)
    }

    /// Exchanges the two coordinates of every pair.
    pub fn swapped(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|&(x, y)| (y, x)).collect(),
        }
    }

    /// Reads a two-column CSV. A first row that does not parse as two numbers
    /// is treated as a header.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_reader(reader);
        let mut pairs = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::format(format!("csv row {}: {e}", line + 1)))?;
            if rec.iter().all(|f| f.is_empty()) {
                continue;
            }
            if rec.len() < 2 {
                return Err(Error::format(format!(
                    "csv row {}: expected two columns, found {}",
                    line + 1,
                    rec.len()
                )));
            }
            let x = rec[0].parse::<f64>();
            let y = rec[1].parse::<f64>();
            match (x, y) {
                (Ok(x), Ok(y)) => pairs.push((x, y)),
                _ if line == 0 => continue,
                _ => {
                    return Err(Error::format(format!(
                        "csv row {}: non-numeric value in {:?}",
                        line + 1,
                        rec.iter().take(2).collect::<Vec<_>>()
                    )))
                }
            }
        }
        Self::new(pairs)
    }

    pub fn read_csv_path(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(f)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W, header: (&str, &str)) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        let map = |e: csv::Error| Error::format(e.to_string());
        wtr.write_record([header.0, header.1]).map_err(map)?;
        for &(x, y) in &self.pairs {
            wtr.write_record([format!("{x}"), format!("{y}")]).map_err(map)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}
