use serde::{Deserialize, Serialize};

use crate::algebra::Mat;
use crate::error::{Error, Result};

/// A `T x d` panel of observations with column names and optional row labels
/// (dates, quarters, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMatrix {
    values: Mat,
    names: Vec<String>,
    labels: Option<Vec<String>>,
}

impl SeriesMatrix {
    pub fn new(values: Mat, names: Vec<String>) -> Result<Self> {
        if names.len() != values.cols() {
            return Err(Error::DimensionMismatch {
                context: "SeriesMatrix::new",
                expected: format!("{} names", values.cols()),
                got: format!("{} names", names.len()),
            });
        }
        if values.rows() == 0 || values.cols() == 0 {
            return Err(Error::InvalidData("empty series matrix".into()));
        }
        if let Some(pos) = values.as_slice().iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!(
                "non-finite value at row {}, column {}",
                pos / values.cols() + 1,
                pos % values.cols() + 1
            )));
        }
        Ok(Self {
            values,
            names,
            labels: None,
        })
    }

    /// Columns named `x1..xd`.
    pub fn from_values(values: Mat) -> Result<Self> {
        let names = (1..=values.cols()).map(|i| format!("x{i}")).collect();
        Self::new(values, names)
    }

    /// Builds a series from observation rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidData("ragged observation rows".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_values(Mat::from_row_major(rows.len(), d, data)?)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::DimensionMismatch {
                context: "SeriesMatrix::with_labels",
                expected: format!("{} labels", self.len()),
                got: format!("{} labels", labels.len()),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Sample size `T`.
    pub fn len(&self) -> usize {
        self.values.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.rows() == 0
    }

    /// Dimension `d`.
    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Mat {
        &self.values
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// Observation `x_t` for 0-based row `t`.
    pub fn obs(&self, t: usize) -> &[f64] {
        self.values.row(t)
    }

    /// First `n` observations, as used by expanding-window estimation.
    pub fn prefix(&self, n: usize) -> Result<SeriesMatrix> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidParameter(format!(
                "prefix length {n} outside 1..={}",
                self.len()
            )));
        }
        let d = self.dim();
        let values = Mat::from_row_major(n, d, self.values.as_slice()[..n * d].to_vec())?;
        Ok(SeriesMatrix {
            values,
            names: self.names.clone(),
            labels: self.labels.as_ref().map(|l| l[..n].to_vec()),
        })
    }

    /// Same observations with every entry of column `col` multiplied by `c`.
    pub fn scale_column(&self, col: usize, c: f64) -> SeriesMatrix {
        let mut values = self.values.clone();
        for t in 0..values.rows() {
            values[(t, col)] *= c;
        }
        SeriesMatrix {
            values,
            names: self.names.clone(),
            labels: self.labels.clone(),
        }
    }

    /// Same observations shifted by `c` in every entry.
    pub fn shift(&self, c: f64) -> SeriesMatrix {
        let values = Mat::from_fn(self.len(), self.dim(), |i, j| self.values[(i, j)] + c);
        SeriesMatrix {
            values,
            names: self.names.clone(),
            labels: self.labels.clone(),
        }
    }
}
