// SPDX-License-Identifier: MIT OR Apache-2.0

//! Pointwise kernels on ℝ^d.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum StaticKernel {
    /// `⟨x, y⟩`
    Linear,
    /// `exp(−‖x − y‖² / (2σ²))`
    Rbf { sigma: f64 },
    /// `(c + ⟨x, y⟩)^p`
    Polynomial { degree: u32, offset: f64 },
}

impl StaticKernel {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StaticKernel::Linear => Ok(()),
            StaticKernel::Rbf { sigma } if sigma > 0.0 && sigma.is_finite() => Ok(()),
            StaticKernel::Rbf { sigma } => Err(Error::InvalidParameter(format!(
                "rbf sigma must be positive and finite, got {sigma}"
            ))),
            StaticKernel::Polynomial { degree, offset } => {
                if degree == 0 {
                    Err(Error::InvalidParameter("polynomial degree must be >= 1".into()))
                } else if !offset.is_finite() {
                    Err(Error::InvalidParameter("polynomial offset must be finite".into()))
                } else {
                    Ok(())
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: y.len(),
            });
        }
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            StaticKernel::Linear => dot(x, y),
            StaticKernel::Rbf { sigma } => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * sigma * sigma)).exp()
            }
            StaticKernel::Polynomial { degree, offset } => {
                (offset + dot(x, y)).powi(degree as i32)
            }
        }
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}
