// SPDX-License-Identifier: MIT OR Apache-2.0

//! The polymorphic sequence-kernel contract used by the variance model.
//!
//! A [`KernelSpec`] is plain configuration. [`KernelSpec::build`] turns it
//! into a [`Kernel`], which owns any frozen state (random parameters) and
//! can [`prepare`](Kernel::prepare) a series once so that repeated pairwise
//! evaluations reuse per-series work: scaled or clipped copies, log GAK
//! self-similarities, randomized-signature features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::vrk_clip;
use crate::series::TimeSeries;
use crate::sig_kernels::{
    PdeSignature, RandomizedSignature, RandomizedSignatureParams, TruncatedSignature,
};
use crate::static_kernels::{dot, StaticKernel};
use crate::ts_kernels;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelFamily {
    /// Static kernel on the series flattened into ℝ^{T·d}.
    Flattened { base: StaticKernel },
    /// Time-averaged static kernel `(1/T) Σ_t k(x_t, y_t)`.
    Integral { base: StaticKernel },
    /// Global alignment kernel, always normalized in feature space.
    Gak { sigma: f64 },
    /// Volterra reservoir kernel. Inputs are clipped so every step is admissible.
    Vrk { tau: f64, lambda: f64 },
    TruncatedSignature(TruncatedSignature),
    PdeSignature(PdeSignature),
    RandomizedSignature(RandomizedSignature),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kernel: KernelFamily,
    /// Replace `K(x, y)` by `K(x, y)/√(K(x, x) K(y, y))`.
    #[serde(default = "default_normalize")]
    pub normalize: bool,
}

fn default_normalize() -> bool {
    true
}

impl KernelSpec {
    pub fn new(kernel: KernelFamily, normalize: bool) -> Self {
        Self { kernel, normalize }
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kernel {
            KernelFamily::Flattened { base } | KernelFamily::Integral { base } => base.validate(),
            KernelFamily::Gak { sigma } => {
                if *sigma > 0.0 && sigma.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("GAK sigma must be positive, got {sigma}")))
                }
            }
            KernelFamily::Vrk { tau, lambda } => ts_kernels::check_vrk_params(*tau, *lambda),
            KernelFamily::TruncatedSignature(k) => k.validate(),
            KernelFamily::PdeSignature(k) => k.validate(),
            KernelFamily::RandomizedSignature(k) => k.validate(),
        }
    }

    /// Validates the spec and freezes any random state for inputs of
    /// dimension `dim`.
    pub fn build(&self, dim: usize) -> Result<Kernel> {
        self.validate()?;
        let randomized = match &self.kernel {
            KernelFamily::RandomizedSignature(k) => Some(k.materialize(dim)?),
            _ => None,
        };
        Ok(Kernel {
            spec: self.clone(),
            dim,
            randomized,
        })
    }

    /// Short human-readable family name.
    pub fn family_name(&self) -> &'static str {
        match &self.kernel {
            KernelFamily::Flattened { .. } => "flattened",
            KernelFamily::Integral { .. } => "integral",
            KernelFamily::Gak { .. } => "gak",
            KernelFamily::Vrk { .. } => "vrk",
            KernelFamily::TruncatedSignature(_) => "truncated_signature",
            KernelFamily::PdeSignature(_) => "pde_signature",
            KernelFamily::RandomizedSignature(_) => "randomized_signature",
        }
    }
}

/// A series after kernel-specific preparation.
#[derive(Clone, Debug)]
pub struct Prepared {
    series: TimeSeries,
    aux: Aux,
}

#[derive(Clone, Debug)]
enum Aux {
    None,
    /// `log K_GA(x, x)`
    LogSelf(f64),
    Features(Vec<f64>),
}

impl Prepared {
    pub fn series(&self) -> &TimeSeries {
        &self.series
    }
}

/// A ready-to-evaluate kernel.
#[derive(Clone, Debug)]
pub struct Kernel {
    spec: KernelSpec,
    dim: usize,
    randomized: Option<RandomizedSignatureParams>,
}

impl Kernel {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn prepare(&self, x: &TimeSeries) -> Result<Prepared> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        let prepared = match &self.spec.kernel {
            KernelFamily::Flattened { .. } | KernelFamily::Integral { .. } => Prepared {
                series: x.clone(),
                aux: Aux::None,
            },
            KernelFamily::Gak { sigma } => Prepared {
                series: x.clone(),
                aux: Aux::LogSelf(ts_kernels::gak_log_unnormalized(*sigma, x, x)?),
            },
            KernelFamily::Vrk { tau, .. } => Prepared {
                series: vrk_clip(*tau, x),
                aux: Aux::None,
            },
            KernelFamily::TruncatedSignature(k) => Prepared {
                series: x.scaled(k.scale),
                aux: Aux::None,
            },
            KernelFamily::PdeSignature(k) => Prepared {
                series: x.scaled(k.scale),
                aux: Aux::None,
            },
            KernelFamily::RandomizedSignature(_) => {
                let params = self.randomized.as_ref().expect("materialized in build");
                Prepared {
                    series: x.clone(),
                    aux: Aux::Features(params.features(x)?),
                }
            }
        };
        Ok(prepared)
    }

    /// Raw kernel value, before the optional feature-space normalization
    /// applied by the variance model.
    pub fn eval(&self, a: &Prepared, b: &Prepared) -> Result<f64> {
        let (x, y) = (&a.series, &b.series);
        let v = match (&self.spec.kernel, &a.aux, &b.aux) {
            (KernelFamily::Flattened { base }, _, _) => ts_kernels::flattened_eval(base, x, y)?,
            (KernelFamily::Integral { base }, _, _) => ts_kernels::integral_eval(base, x, y)?,
            (KernelFamily::Gak { sigma }, Aux::LogSelf(sx), Aux::LogSelf(sy)) => {
                let xy = ts_kernels::gak_log_unnormalized(*sigma, x, y)?;
                ts_kernels::gak_normalize(xy, *sx, *sy)
            }
            (KernelFamily::Vrk { tau, lambda }, _, _) => ts_kernels::vrk_eval(*tau, *lambda, x, y)?,
            (KernelFamily::TruncatedSignature(k), _, _) => k.eval_prescaled(x, y)?,
            (KernelFamily::PdeSignature(k), _, _) => k.eval_prescaled(x, y)?,
            (KernelFamily::RandomizedSignature(_), Aux::Features(fx), Aux::Features(fy)) => dot(fx, fy),
            _ => unreachable!("prepared by a different kernel"),
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::KernelFailure(format!(
                "{} kernel produced a non-finite value",
                self.spec.family_name()
            )))
        }
    }

    /// Convenience: prepare both series and evaluate.
    pub fn eval_series(&self, x: &TimeSeries, y: &TimeSeries) -> Result<f64> {
        self.eval(&self.prepare(x)?, &self.prepare(y)?)
    }
}
