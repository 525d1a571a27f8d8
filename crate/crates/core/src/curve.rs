use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};

/// Which function a [`SummaryCurve`] discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    K,
    LCentered,
    F,
    MarkCorr,
    Ecdf,
}

/// A function estimate on a fixed, strictly increasing r-grid.
///
/// `NaN` marks a grid value where the estimate is undefined (no kernel mass
/// for the mark correlation, for instance).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCurve {
    grid: Vec<f64>,
    values: Vec<f64>,
    kind: CurveKind,
}

impl SummaryCurve {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, kind: CurveKind) -> Result<Self> {
        check_grid(&grid)?;
        if values.len() != grid.len() {
            return Err(invalid_arg(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values, kind })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> CurveKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn map_values(&self, kind: CurveKind, f: impl Fn(f64, f64) -> f64) -> SummaryCurve {
        SummaryCurve {
            grid: self.grid.clone(),
            values: self
                .grid
                .iter()
                .zip(&self.values)
                .map(|(&r, &v)| f(r, v))
                .collect(),
            kind,
        }
    }

    pub fn same_grid(&self, other: &SummaryCurve) -> bool {
        self.grid == other.grid
    }

    /// Writes `r,value`; missing values become empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "value"])?;
        for (r, v) in self.grid.iter().zip(&self.values) {
            let v = if v.is_nan() { String::new() } else { v.to_string() };
            w.write_record([r.to_string(), v])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R, kind: CurveKind) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let mut grid = Vec::new();
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let parse = |field: &str| -> Result<f64> {
                field.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: "<curve>".into(),
                    line,
                    message: format!("'{field}': {e}"),
                })
            };
            grid.push(parse(rec.get(0).unwrap_or(""))?);
            let v = rec.get(1).unwrap_or("");
            values.push(if v.trim().is_empty() { f64::NAN } else { parse(v)? });
        }
        SummaryCurve::new(grid, values, kind)
    }
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid_arg("empty r-grid"));
    }
    if grid.iter().any(|r| !r.is_finite()) {
        return Err(invalid_arg("non-finite r-grid value"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid_arg("r-grid must be strictly increasing"));
    }
    Ok(())
}

/// `start, start + step, ...` up to and including `stop` (within rounding).
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Vec<f64> {
    assert!(step > 0.0 && stop >= start);
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| start + i as f64 * step).collect()
}
