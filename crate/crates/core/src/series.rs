// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A length-`len`, dimension-`dim` real-valued sequence stored row-major:
/// `values[t * dim + k]` is channel `k` at step `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSeries", into = "RawSeries")]
pub struct TimeSeries {
    len: usize,
    dim: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSeries {
    len: usize,
    dim: usize,
    values: Vec<f64>,
}

impl TryFrom<RawSeries> for TimeSeries {
    type Error = Error;
    fn try_from(raw: RawSeries) -> Result<Self> {
        TimeSeries::new(raw.len, raw.dim, raw.values)
    }
}

impl From<TimeSeries> for RawSeries {
    fn from(ts: TimeSeries) -> Self {
        RawSeries {
            len: ts.len,
            dim: ts.dim,
            values: ts.values,
        }
    }
}

impl TimeSeries {
    pub fn new(len: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if len == 0 || dim == 0 {
            return Err(Error::InvalidSeries(format!(
                "length and dimension must be positive, got {len}x{dim}"
            )));
        }
        if values.len() != len * dim {
            return Err(Error::InvalidSeries(format!(
                "{} values cannot fill a {len}x{dim} series",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidSeries(format!(
                "non-finite entry at step {}, channel {}",
                pos / dim,
                pos % dim
            )));
        }
        Ok(Self { len, dim, values })
    }

    /// Builds a series from per-step state vectors.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (t, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != dim {
                return Err(Error::InvalidSeries(format!(
                    "row {t} has {} channels, expected {dim}",
                    row.len()
                )));
            }
            values.extend_from_slice(row);
        }
        Self::new(rows.len(), dim, values)
    }

    /// A univariate series.
    pub fn univariate(values: &[f64]) -> Result<Self> {
        Self::new(values.len(), 1, values.to_vec())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.dim)
    }

    /// Rows concatenated in time order.
    pub fn flat(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Applies `f` to every entry. The caller guarantees finiteness of the result.
    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            len: self.len,
            dim: self.dim,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, factor: f64) -> TimeSeries {
        self.map(|v| v * factor)
    }

    pub(crate) fn from_parts_unchecked(len: usize, dim: usize, values: Vec<f64>) -> TimeSeries {
        debug_assert_eq!(values.len(), len * dim);
        TimeSeries { len, dim, values }
    }
}
