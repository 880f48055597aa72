// SPDX-License-Identifier: MIT OR Apache-2.0

//! Distributional utilities for squared regularized scores under a Gaussian
//! measure: a weighted sum of independent χ²₁ variables with weights
//! `(λ/(λ+α))²`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, SymMatrix};

fn shrink(lambda: f64, alpha: f64) -> f64 {
    if lambda == 0.0 {
        return 0.0;
    }
    let r = lambda / (lambda + alpha);
    r * r
}

/// Mean and variance of `Σ_n (λ_n/(λ_n+α))² Y_n` with `Y_n ~ χ²₁` i.i.d.
pub fn chi2_mixture_moments(eigenvalues: &[f64], alpha: f64) -> (f64, f64) {
    let mut mean = 0.0;
    let mut var = 0.0;
    for &l in eigenvalues {
        let w = shrink(l, alpha);
        mean += w;
        var += 2.0 * w * w;
    }
    (mean, var)
}

/// Monte-Carlo `q`-quantile of the same mixture. Deterministic in `seed`.
pub fn threshold_quantile(
    eigenvalues: &[f64],
    alpha: f64,
    q: f64,
    mc_samples: usize,
    seed: u64,
) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!("quantile must be in (0, 1), got {q}")));
    }
    if mc_samples < 1000 {
        return Err(Error::InvalidParameter(format!(
            "need at least 1000 Monte-Carlo samples, got {mc_samples}"
        )));
    }
    if !(alpha >= 0.0) || eigenvalues.iter().any(|l| !(*l >= 0.0)) {
        return Err(Error::InvalidParameter("eigenvalues and alpha must be >= 0".into()));
    }
    if eigenvalues.is_empty() {
        return Ok(0.0);
    }
    let weights: Vec<f64> = eigenvalues.iter().map(|&l| shrink(l, alpha)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws: Vec<f64> = (0..mc_samples)
        .map(|_| {
            weights
                .iter()
                .map(|w| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    w * z * z
                })
                .sum()
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    let rank = ((q * mc_samples as f64).ceil() as usize).clamp(1, mc_samples);
    Ok(draws[rank - 1])
}

/// α-regularized variance norm of `x − mean` under a Gaussian with known
/// covariance: `√(Σ_m (λ_m/(λ_m+α))² ⟨v_m, x − mean⟩² / λ_m)`.
///
/// Directions with eigenvalue at most `1e-12 · λ_max` are dropped.
pub fn regularized_population_norm(mean: &[f64], cov: &SymMatrix, x: &[f64], alpha: f64) -> Result<f64> {
    let d = cov.order();
    for len in [mean.len(), x.len()] {
        if len != d {
            return Err(Error::DimensionMismatch { expected: d, found: len });
        }
    }
    let eig = eig_sym(cov)?;
    let cutoff = 1e-12 * eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let mut sq = 0.0;
    for m in 0..d {
        let l = eig.eigenvalues[m];
        if l <= cutoff {
            break;
        }
        let coord: f64 = (0..d).map(|i| eig.vector_component(i, m) * (x[i] - mean[i])).sum();
        sq += shrink(l, alpha) * coord * coord / l;
    }
    Ok(sq.sqrt())
}
