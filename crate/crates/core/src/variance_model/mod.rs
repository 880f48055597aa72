// SPDX-License-Identifier: MIT OR Apache-2.0

//! Empirical covariance model in feature space and the two anomaly scores
//! built on it.
//!
//! Fitting works entirely through kernel evaluations. With the corpus Gram
//! matrix `B`, row means `a` and grand mean `b`, the centered and scaled
//! matrix
//!
//! ```text
//! A[i][j] = (B[i][j] − a_i − a_j + b) / N
//! ```
//!
//! holds the inner products `⟨f_i, f_j⟩` of `f_i = (φ(x_i) − m̂)/√N`, so the
//! eigenpairs `(λ_m, u_m)` of `A` give the unit eigenvectors
//! `ê_m = Σ_i u_m[i] f_i / √λ_m` of the empirical covariance operator. A
//! point `y` enters only through `s_i = k(y, x_i)`:
//!
//! ```text
//! p_m = Σ_i u_m[i] (s_i − mean(s)) / √(N λ_m) = ⟨ê_m, φ(y)⟩
//! ```
//!
//! Scores use the unit coordinate `(p_m − c_m)/√λ_m`, where `c_m` is the
//! corpus mean of the fitted coordinates, shrunk by `(λ_m/(λ_m + α))²`.

mod distribution;
mod persist;

pub use distribution::{chi2_mixture_moments, regularized_population_norm, threshold_quantile};
pub use persist::{ModelFile, MODEL_FORMAT, MODEL_VERSION};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelSpec, Prepared};
use crate::linalg::{eig_psd_floor, SymMatrix, DEFAULT_EIGEN_THRESHOLD};
use crate::series::TimeSeries;

/// Default cap on the number of retained eigenpairs.
pub const DEFAULT_MAX_EIGEN: usize = 50;

/// Relative tolerance on the off-span residual below which a point counts
/// as lying in the span of the centered corpus.
pub const RESIDUAL_TOLERANCE: f64 = 1e-6;

const MIN_SELF_KERNEL: f64 = 1e-300;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMethod {
    /// Variance-norm distance to the corpus mean.
    Mahalanobis,
    /// Variance-norm distance to the nearest corpus point.
    Conformance,
}

impl std::fmt::Display for ScoreMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ScoreMethod::Mahalanobis => "mahalanobis",
            ScoreMethod::Conformance => "conformance",
        })
    }
}

impl std::str::FromStr for ScoreMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mahalanobis" => Ok(ScoreMethod::Mahalanobis),
            "conformance" => Ok(ScoreMethod::Conformance),
            other => Err(Error::InvalidParameter(format!("unknown score method {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScorerConfig {
    pub method: ScoreMethod,
    /// Tikhonov parameter; `0` gives the exact `1/λ` weighting.
    #[serde(default)]
    pub alpha: f64,
}

impl ScorerConfig {
    pub fn new(method: ScoreMethod, alpha: f64) -> Self {
        Self { method, alpha }
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha >= 0.0 && self.alpha.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("alpha must be >= 0, got {}", self.alpha)))
        }
    }
}

/// Fit settings besides the kernel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_max_eigen")]
    pub max_eigen: usize,
}

fn default_threshold() -> f64 {
    DEFAULT_EIGEN_THRESHOLD
}

fn default_max_eigen() -> usize {
    DEFAULT_MAX_EIGEN
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_EIGEN_THRESHOLD,
            max_eigen: DEFAULT_MAX_EIGEN,
        }
    }
}

/// Projection of a point onto the fitted eigenbasis.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenCoords {
    /// `p_m = ⟨ê_m, φ(y)⟩` for the retained eigenpairs.
    pub p: Vec<f64>,
    /// Squared feature-space distance from `φ(y) − m̂` to its projection on
    /// the retained eigenvectors.
    pub residual: f64,
    /// Whether the residual is within tolerance, i.e. `y − m̂` lies in the span.
    pub finite: bool,
    /// `k(y, y)`, normalized when the kernel is.
    pub self_kernel: f64,
}

/// Fitted empirical covariance model.
#[derive(Clone, Debug)]
pub struct VarianceModel {
    spec: KernelSpec,
    fit: FitConfig,
    corpus: Vec<TimeSeries>,
    kernel: Kernel,
    prepared: Vec<Prepared>,
    /// Raw `k(x_i, x_i)`.
    gram_diag: Vec<f64>,
    row_means: Vec<f64>,
    grand_mean: f64,
    /// All `N` eigenvalues of the centered Gram matrix, non-increasing.
    eigenvalues: Vec<f64>,
    /// Row-major `N × N`, column `m` pairs with `eigenvalues[m]`.
    eigenvectors: Vec<f64>,
    retained: usize,
    /// Row-major `N × M`: `coords[n][m] = ⟨ê_m, φ(x_n)⟩`.
    coords: Vec<f64>,
    coord_means: Vec<f64>,
}

impl VarianceModel {
    pub fn fit(corpus: Vec<TimeSeries>, spec: KernelSpec, fit: FitConfig) -> Result<Self> {
        let n = corpus.len();
        if n < 2 {
            return Err(Error::CorpusTooSmall { needed: 2, got: n });
        }
        if !(fit.threshold >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "eigenvalue threshold must be >= 0, got {}",
                fit.threshold
            )));
        }
        let dim = corpus[0].dim();
        for s in &corpus {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.dim(),
                });
            }
        }
        let kernel = spec.build(dim)?;
        let prepared = prepare_all(&kernel, &corpus)?;

        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
        let values = pairs
            .par_iter()
            .map(|&(i, j)| kernel.eval(&prepared[i], &prepared[j]))
            .collect::<Result<Vec<f64>>>()?;
        let mut gram = vec![0.0; n * n];
        for (&(i, j), v) in pairs.iter().zip(values) {
            gram[i * n + j] = v;
            gram[j * n + i] = v;
        }
        let gram_diag: Vec<f64> = (0..n).map(|i| gram[i * n + i]).collect();
        if spec.normalize {
            for (i, &d) in gram_diag.iter().enumerate() {
                if !(d >= MIN_SELF_KERNEL) {
                    return Err(Error::KernelFailure(format!(
                        "self-similarity {d:e} of corpus series {i} is too small to normalize"
                    )));
                }
            }
            for i in 0..n {
                for j in 0..n {
                    gram[i * n + j] /= (gram_diag[i] * gram_diag[j]).sqrt();
                }
            }
        }

        let nf = n as f64;
        let row_means: Vec<f64> = gram.chunks_exact(n).map(|r| r.iter().sum::<f64>() / nf).collect();
        let grand_mean = row_means.iter().sum::<f64>() / nf;
        let centered = SymMatrix::from_fn(n, |i, j| {
            (gram[i * n + j] - row_means[i] - row_means[j] + grand_mean) / nf
        })?;
        let scale = gram.iter().fold(0.0f64, |m, v| m.max(v.abs())) / nf;
        let eig = eig_psd_floor(&centered, 1e-12 * scale)?;
        let retained = eig.rank_above(fit.threshold).min(fit.max_eigen);

        let mut coords = vec![0.0; n * retained];
        for m in 0..retained {
            let norm = (nf * eig.eigenvalues[m]).sqrt();
            for col in 0..n {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += eig.vector_component(i, m) * (gram[i * n + col] - row_means[col]);
                }
                coords[col * retained + m] = acc / norm;
            }
        }
        let coord_means = (0..retained)
            .map(|m| (0..n).map(|r| coords[r * retained + m]).sum::<f64>() / nf)
            .collect();

        Ok(Self {
            spec,
            fit,
            corpus,
            kernel,
            prepared,
            gram_diag,
            row_means,
            grand_mean,
            eigenvalues: eig.eigenvalues,
            eigenvectors: eig.eigenvectors,
            retained,
            coords,
            coord_means,
        })
    }

    pub fn kernel_spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn fit_config(&self) -> FitConfig {
        self.fit
    }

    pub fn corpus(&self) -> &[TimeSeries] {
        &self.corpus
    }

    pub fn len(&self) -> usize {
        self.corpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// All eigenvalues of the centered Gram matrix, non-increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of eigenpairs used for scoring.
    pub fn retained(&self) -> usize {
        self.retained
    }

    /// No eigenvalue passed the threshold: the corpus is a single point in
    /// feature space.
    pub fn is_degenerate(&self) -> bool {
        self.retained == 0
    }

    pub fn eigenvector_component(&self, i: usize, m: usize) -> f64 {
        self.eigenvectors[i * self.len() + m]
    }

    /// Fitted eigen-coordinates of corpus point `n`.
    pub fn corpus_coords(&self, n: usize) -> &[f64] {
        &self.coords[n * self.retained..(n + 1) * self.retained]
    }

    pub fn coord_means(&self) -> &[f64] {
        &self.coord_means
    }

    pub fn row_means(&self) -> &[f64] {
        &self.row_means
    }

    pub fn grand_mean(&self) -> f64 {
        self.grand_mean
    }

    pub fn gram_diag(&self) -> &[f64] {
        &self.gram_diag
    }

    pub fn eigen_coords(&self, y: &TimeSeries) -> Result<EigenCoords> {
        let py = self.kernel.prepare(y)?;
        let n = self.len();
        let mut s = self
            .prepared
            .iter()
            .map(|px| self.kernel.eval(&py, px))
            .collect::<Result<Vec<f64>>>()?;
        let mut self_kernel = self.kernel.eval(&py, &py)?;
        if self.spec.normalize {
            if !(self_kernel >= MIN_SELF_KERNEL) {
                return Err(Error::KernelFailure(format!(
                    "self-similarity {self_kernel:e} of the query is too small to normalize"
                )));
            }
            for (si, &d) in s.iter_mut().zip(&self.gram_diag) {
                *si /= (self_kernel * d).sqrt();
            }
            self_kernel = 1.0;
        }
        let nf = n as f64;
        let r = s.iter().sum::<f64>() / nf;
        let p: Vec<f64> = (0..self.retained)
            .map(|m| {
                let acc: f64 = (0..n).map(|i| self.eigenvector_component(i, m) * (s[i] - r)).sum();
                acc / (nf * self.eigenvalues[m]).sqrt()
            })
            .collect();
        let projected: f64 = p
            .iter()
            .zip(&self.coord_means)
            .map(|(pm, cm)| (pm - cm) * (pm - cm))
            .sum();
        let residual = self_kernel - 2.0 * r + self.grand_mean - projected;
        Ok(EigenCoords {
            finite: residual <= RESIDUAL_TOLERANCE * (1.0 + self_kernel.abs()),
            p,
            residual,
            self_kernel,
        })
    }

    /// `(λ_m/(λ_m + α))² / λ_m`, the weight on a squared raw coordinate.
    fn weight(&self, m: usize, alpha: f64) -> f64 {
        let l = self.eigenvalues[m];
        l / ((l + alpha) * (l + alpha))
    }

    pub fn mahalanobis(&self, alpha: f64, y: &TimeSeries) -> Result<f64> {
        let coords = self.eigen_coords(y)?;
        Ok(self.mahalanobis_from(&coords, alpha))
    }

    pub fn conformance(&self, alpha: f64, y: &TimeSeries) -> Result<f64> {
        let coords = self.eigen_coords(y)?;
        Ok(self.conformance_from(&coords, alpha))
    }

    pub fn mahalanobis_from(&self, coords: &EigenCoords, alpha: f64) -> f64 {
        self.score_prefix(coords, ScoreMethod::Mahalanobis, alpha, self.retained)
    }

    pub fn conformance_from(&self, coords: &EigenCoords, alpha: f64) -> f64 {
        self.score_prefix(coords, ScoreMethod::Conformance, alpha, self.retained)
    }

    /// Number of eigenpairs a refit with eigenvalue cutoff `threshold` would
    /// keep, capped by the fitted count.
    pub fn retained_for(&self, threshold: f64) -> usize {
        self.eigenvalues
            .iter()
            .take_while(|&&l| l > threshold)
            .count()
            .min(self.retained)
    }

    /// Score using only the leading `k ≤ retained()` eigenpairs. Equals the
    /// score of a model fitted with a cutoff that keeps exactly `k` pairs,
    /// so one fit serves a whole threshold grid.
    pub fn score_prefix(&self, coords: &EigenCoords, method: ScoreMethod, alpha: f64, k: usize) -> f64 {
        let k = k.min(self.retained);
        if alpha == 0.0 {
            let dropped: f64 = (k..self.retained)
                .map(|m| {
                    let d = coords.p[m] - self.coord_means[m];
                    d * d
                })
                .sum();
            let residual = coords.residual + dropped;
            if residual > RESIDUAL_TOLERANCE * (1.0 + coords.self_kernel.abs()) {
                return f64::INFINITY;
            }
        }
        let weights: Vec<f64> = (0..k).map(|m| self.weight(m, alpha)).collect();
        let sq = match method {
            ScoreMethod::Mahalanobis => weights
                .iter()
                .zip(&coords.p)
                .zip(&self.coord_means)
                .map(|((w, p), c)| w * (p - c) * (p - c))
                .sum(),
            ScoreMethod::Conformance => (0..self.len())
                .map(|n| {
                    weights
                        .iter()
                        .zip(&coords.p)
                        .zip(self.corpus_coords(n))
                        .map(|((w, p), e)| w * (p - e) * (p - e))
                        .sum::<f64>()
                })
                .fold(f64::INFINITY, f64::min),
        };
        sq.sqrt()
    }

    pub fn score(&self, cfg: &ScorerConfig, y: &TimeSeries) -> Result<f64> {
        cfg.validate()?;
        let coords = self.eigen_coords(y)?;
        Ok(match cfg.method {
            ScoreMethod::Mahalanobis => self.mahalanobis_from(&coords, cfg.alpha),
            ScoreMethod::Conformance => self.conformance_from(&coords, cfg.alpha),
        })
    }

    /// Scores many points in parallel; output order follows the input.
    pub fn score_many(&self, cfg: &ScorerConfig, ys: &[TimeSeries]) -> Result<Vec<f64>> {
        cfg.validate()?;
        ys.par_iter().map(|y| self.score(cfg, y)).collect()
    }

    /// Rebuilds a model from stored state; used when loading model files.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        spec: KernelSpec,
        fit: FitConfig,
        corpus: Vec<TimeSeries>,
        gram_diag: Vec<f64>,
        row_means: Vec<f64>,
        grand_mean: f64,
        eigenvalues: Vec<f64>,
        eigenvectors: Vec<f64>,
        retained: usize,
        coords: Vec<f64>,
        coord_means: Vec<f64>,
    ) -> Result<Self> {
        let n = corpus.len();
        let bad = |what: &str| Error::ModelFormat(format!("{what} does not match corpus size {n}"));
        if n < 2 {
            return Err(Error::CorpusTooSmall { needed: 2, got: n });
        }
        if gram_diag.len() != n {
            return Err(bad("gram_diag"));
        }
        if row_means.len() != n {
            return Err(bad("row_means"));
        }
        if eigenvalues.len() != n {
            return Err(bad("eigenvalues"));
        }
        if eigenvectors.len() != n * n {
            return Err(bad("eigenvectors"));
        }
        if retained > n || coords.len() != n * retained || coord_means.len() != retained {
            return Err(bad("retained coordinates"));
        }
        let dim = corpus[0].dim();
        if corpus.iter().any(|s| s.dim() != dim) {
            return Err(Error::ModelFormat("corpus series have mixed dimensions".into()));
        }
        let kernel = spec.build(dim)?;
        let prepared = prepare_all(&kernel, &corpus)?;
        Ok(Self {
            spec,
            fit,
            corpus,
            kernel,
            prepared,
            gram_diag,
            row_means,
            grand_mean,
            eigenvalues,
            eigenvectors,
            retained,
            coords,
            coord_means,
        })
    }

    pub(crate) fn raw_eigenvectors(&self) -> &[f64] {
        &self.eigenvectors
    }

    pub(crate) fn raw_coords(&self) -> &[f64] {
        &self.coords
    }
}

fn prepare_all(kernel: &Kernel, corpus: &[TimeSeries]) -> Result<Vec<Prepared>> {
    corpus.par_iter().map(|s| kernel.prepare(s)).collect()
}
