// SPDX-License-Identifier: MIT OR Apache-2.0

//! Sequence kernels that are not signature based: flattened static kernels,
//! integral-class (linear time warping) kernels, the global alignment kernel
//! and the Volterra reservoir kernel.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::static_kernels::{dot, StaticKernel};

fn same_shape(x: &TimeSeries, y: &TimeSeries) -> Result<()> {
    if x.len() != y.len() || x.dim() != y.dim() {
        return Err(Error::ShapeMismatch {
            left_len: x.len(),
            left_dim: x.dim(),
            right_len: y.len(),
            right_dim: y.dim(),
        });
    }
    Ok(())
}

fn same_dim(x: &TimeSeries, y: &TimeSeries) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

/// Static kernel applied to the series flattened into ℝ^{T·d}.
pub fn flattened_eval(base: &StaticKernel, x: &TimeSeries, y: &TimeSeries) -> Result<f64> {
    same_shape(x, y)?;
    Ok(base.eval_unchecked(x.flat(), y.flat()))
}

/// `(1/T) Σ_t k(x_t, y_t)`: left Riemann sum of `∫ k(x_t, y_t) dt` on a
/// regular grid over `[0, 1]`.
pub fn integral_eval(base: &StaticKernel, x: &TimeSeries, y: &TimeSeries) -> Result<f64> {
    same_shape(x, y)?;
    let sum: f64 = x
        .rows()
        .zip(y.rows())
        .map(|(a, b)| base.eval_unchecked(a, b))
        .sum();
    Ok(sum / x.len() as f64)
}

/// `log κ(a, b)` for the local similarity `κ = k_rbf / (2 − k_rbf)`.
#[inline]
fn gak_log_local(sigma: f64, a: &[f64], b: &[f64]) -> f64 {
    let sq: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
    let q = sq / (2.0 * sigma * sigma);
    // ln(2 − e^{−q}) = ln(1 + (1 − e^{−q}))
    -q - (-(-q).exp_m1()).ln_1p()
}

#[inline]
fn log_sum_exp3(a: f64, b: f64, c: f64) -> f64 {
    let m = a.max(b).max(c);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp() + (c - m).exp()).ln()
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "GAK bandwidth must be positive and finite, got {sigma}"
        )))
    }
}

/// Logarithm of the unnormalized global alignment kernel, computed by the
/// log-domain recursion `M[i][j] = κ(x_i, y_j)·(M[i−1][j] + M[i][j−1] + M[i−1][j−1])`.
pub fn gak_log_unnormalized(sigma: f64, x: &TimeSeries, y: &TimeSeries) -> Result<f64> {
    check_sigma(sigma)?;
    same_dim(x, y)?;
    let cols = y.len() + 1;
    let mut prev = vec![f64::NEG_INFINITY; cols];
    let mut cur = vec![f64::NEG_INFINITY; cols];
    prev[0] = 0.0;
    for xi in x.rows() {
        cur[0] = f64::NEG_INFINITY;
        for (j, yj) in y.rows().enumerate() {
            let acc = log_sum_exp3(prev[j + 1], cur[j], prev[j]);
            cur[j + 1] = gak_log_local(sigma, xi, yj) + acc;
        }
        std::mem::swap(&mut prev, &mut cur);
        // The corner only feeds the first cell.
        prev[0] = f64::NEG_INFINITY;
    }
    let out = prev[cols - 1];
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::NumericalUnderflow)
    }
}

/// Same recursion in the linear domain. Underflows for long series; kept as
/// a cross-check for the log-domain path.
pub fn gak_linear_unnormalized(sigma: f64, x: &TimeSeries, y: &TimeSeries) -> Result<f64> {
    check_sigma(sigma)?;
    same_dim(x, y)?;
    let cols = y.len() + 1;
    let mut prev = vec![0.0; cols];
    let mut cur = vec![0.0; cols];
    prev[0] = 1.0;
    for xi in x.rows() {
        cur[0] = 0.0;
        for (j, yj) in y.rows().enumerate() {
            let kappa = gak_log_local(sigma, xi, yj).exp();
            cur[j + 1] = kappa * (prev[j + 1] + cur[j] + prev[j]);
        }
        std::mem::swap(&mut prev, &mut cur);
        prev[0] = 0.0;
    }
    Ok(prev[cols - 1])
}

/// Global alignment kernel normalized in feature space,
/// `K(x, y) / √(K(x, x) K(y, y))`.
pub fn gak_eval(sigma: f64, x: &TimeSeries, y: &TimeSeries) -> Result<f64> {
    let xy = gak_log_unnormalized(sigma, x, y)?;
    let xx = gak_log_unnormalized(sigma, x, x)?;
    let yy = gak_log_unnormalized(sigma, y, y)?;
    Ok(gak_normalize(xy, xx, yy))
}

/// Normalizes a log-domain GAK value given cached log self-similarities.
pub(crate) fn gak_normalize(log_xy: f64, log_xx: f64, log_yy: f64) -> f64 {
    (log_xy - 0.5 * (log_xx + log_yy)).exp()
}

/// Median of `‖x_s − y_t‖` over `samples` uniformly drawn pairs of
/// (series, step) positions in the corpus. Used to scale GAK bandwidths.
pub fn median_pairwise_distance(corpus: &[TimeSeries], samples: usize, seed: u64) -> Result<f64> {
    if corpus.is_empty() || samples == 0 {
        return Err(Error::EmptyStats);
    }
    let dim = corpus[0].dim();
    for s in corpus {
        same_dim(&corpus[0], s)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pick = |rng: &mut ChaCha8Rng| {
        let s = &corpus[rng.random_range(0..corpus.len())];
        s.row(rng.random_range(0..s.len()))
    };
    let mut dists: Vec<f64> = (0..samples)
        .map(|_| {
            let a = pick(&mut rng);
            let b = pick(&mut rng);
            (0..dim).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum::<f64>().sqrt()
        })
        .collect();
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    Ok(if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        0.5 * (dists[mid - 1] + dists[mid])
    })
}

/// Volterra reservoir kernel
/// `1 + Σ_{k=1}^{T} λ^{2k} Π_{t=0}^{k−1} 1/(1 − τ²⟨x_{T−t}, y_{T−t}⟩)`,
/// evaluated by the state recursion `K_t = 1 + λ² K_{t−1}/(1 − τ²⟨x_t, y_t⟩)`.
pub fn vrk_eval(tau: f64, lambda: f64, x: &TimeSeries, y: &TimeSeries) -> Result<f64> {
    check_vrk_params(tau, lambda)?;
    same_shape(x, y)?;
    let tau2 = tau * tau;
    let lambda2 = lambda * lambda;
    let mut k = 1.0;
    for (t, (a, b)) in x.rows().zip(y.rows()).enumerate() {
        let margin = 1.0 - tau2 * dot(a, b);
        if margin <= 1e-12 {
            return Err(Error::DomainViolation { step: t, margin });
        }
        k = 1.0 + lambda2 * k / margin;
    }
    Ok(k)
}

pub(crate) fn check_vrk_params(tau: f64, lambda: f64) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidParameter(format!("VRK tau must be positive, got {tau}")));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "VRK lambda must lie in (0, 1), got {lambda}"
        )));
    }
    Ok(())
}
