// SPDX-License-Identifier: MIT OR Apache-2.0

//! Kernelized variance-norm anomaly scores for multivariate time series.
//!
//! A corpus of normal series is embedded in a feature space through a
//! sequence kernel. The empirical covariance of the embedded corpus is
//! diagonalized from the centered Gram matrix, and new series are scored by
//! a (regularized) Mahalanobis distance to the corpus mean or to the
//! nearest corpus point.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kernel;
pub mod linalg;
pub mod oracle;
pub mod pipeline;
pub mod selftest;
pub mod series;
pub mod sig_kernels;
pub mod static_kernels;
pub mod ts_kernels;
pub mod variance_model;

pub use error::{Error, Result};
pub use kernel::{Kernel, KernelFamily, KernelSpec};
pub use series::TimeSeries;
pub use variance_model::{FitConfig, ScoreMethod, ScorerConfig, VarianceModel};
