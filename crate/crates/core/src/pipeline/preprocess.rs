// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Standard deviations below this are replaced by it.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocConfig {
    #[serde(default = "default_max_len")]
    pub max_len: usize,
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default)]
    pub add_time: bool,
    #[serde(default = "default_true")]
    pub add_basepoint: bool,
}

fn default_max_len() -> usize {
    100
}

fn default_clip() -> f64 {
    5.0
}

fn default_true() -> bool {
    true
}

impl Default for PreprocConfig {
    fn default() -> Self {
        Self {
            max_len: 100,
            clip: 5.0,
            add_time: false,
            add_basepoint: true,
        }
    }
}

impl PreprocConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_len < 2 {
            return Err(Error::InvalidParameter(format!("max_len must be >= 2, got {}", self.max_len)));
        }
        if !(self.clip > 0.0) {
            return Err(Error::InvalidParameter(format!("clip must be > 0, got {}", self.clip)));
        }
        Ok(())
    }

    /// Dimension of a preprocessed series whose raw dimension is `dim`.
    pub fn output_dim(&self, dim: usize) -> usize {
        dim + usize::from(self.add_time)
    }
}

/// Preprocessing with frozen per-dimension statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preprocessor {
    pub config: PreprocConfig,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Preprocessor {
    /// Computes per-dimension mean and (population) standard deviation over
    /// every time step of every series in `stats_source`.
    pub fn fit(config: PreprocConfig, stats_source: &[TimeSeries]) -> Result<Self> {
        config.validate()?;
        let first = stats_source.first().ok_or(Error::EmptyStats)?;
        let d = first.dim();
        let mut count = 0usize;
        let mut mean = vec![0.0; d];
        for s in stats_source {
            if s.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: s.dim(),
                });
            }
            for row in s.rows() {
                for (m, v) in mean.iter_mut().zip(row) {
                    *m += v;
                }
            }
            count += s.len();
        }
        let n = count as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for s in stats_source {
            for row in s.rows() {
                for k in 0..d {
                    let c = row[k] - mean[k];
                    var[k] += c * c;
                }
            }
        }
        let std = var.into_iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { config, mean, std })
    }

    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim(self.input_dim())
    }

    pub fn apply(&self, x: &TimeSeries) -> Result<TimeSeries> {
        let d = self.input_dim();
        if x.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: x.dim(),
            });
        }
        let cfg = &self.config;
        let k = x.len().div_ceil(cfg.max_len);
        let pooled_len = x.len().div_ceil(k);
        let len = pooled_len + usize::from(cfg.add_basepoint);
        let out_dim = self.output_dim();
        let mut values = Vec::with_capacity(len * out_dim);
        let push_time = |values: &mut Vec<f64>, t: usize| {
            if cfg.add_time {
                values.push(if len > 1 { t as f64 / (len - 1) as f64 } else { 0.0 });
            }
        };
        let mut t = 0;
        if cfg.add_basepoint {
            values.extend(std::iter::repeat_n(0.0, d));
            push_time(&mut values, 0);
            t += 1;
        }
        for w in 0..pooled_len {
            let start = w * k;
            let end = (start + k).min(x.len());
            for c in 0..d {
                let mut acc = 0.0;
                for s in start..end {
                    acc += (x.row(s)[c] - self.mean[c]) / self.std[c];
                }
                let v = acc / (end - start) as f64;
                values.push(v.clamp(-cfg.clip, cfg.clip));
            }
            push_time(&mut values, t);
            t += 1;
        }
        Ok(TimeSeries::from_parts_unchecked(len, out_dim, values))
    }

    pub fn apply_all(&self, xs: &[TimeSeries]) -> Result<Vec<TimeSeries>> {
        xs.iter().map(|x| self.apply(x)).collect()
    }
}

/// One-shot preprocessing of `target` with statistics from `stats_source`.
pub fn preprocess(cfg: &PreprocConfig, stats_source: &[TimeSeries], target: &TimeSeries) -> Result<TimeSeries> {
    Preprocessor::fit(*cfg, stats_source)?.apply(target)
}

/// Magnitude bound `√0.99/(τ√d)` used by [`vrk_clip`].
pub fn vrk_clip_bound(tau: f64, dim: usize) -> f64 {
    0.99f64.sqrt() / (tau * (dim as f64).sqrt())
}

/// Clips every entry to `vrk_clip_bound(tau, d)`, so that
/// `τ²|⟨x_t, y_t⟩| ≤ 0.99` for any two clipped series.
pub fn vrk_clip(tau: f64, x: &TimeSeries) -> TimeSeries {
    let b = vrk_clip_bound(tau, x.dim());
    x.map(|v| v.clamp(-b, b))
}
