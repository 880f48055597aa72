// SPDX-License-Identifier: MIT OR Apache-2.0

//! Signature kernels.
//!
//! All three variants work on the double-increment matrix of a static base
//! kernel `k` lifted along two paths,
//!
//! ```text
//! κ[i][j] = k(x_{i+1}, y_{j+1}) − k(x_{i+1}, y_j) − k(x_i, y_{j+1}) + k(x_i, y_j)
//! ```
//!
//! which, for the linear base, is `⟨Δx_i, Δy_j⟩`.
//!
//! The truncated kernel uses the discrete signature convention: the
//! signature of a sequence is the tensor-algebra product `Π_t (1 + Δx_t)`
//! truncated at level `m`, so level `m` collects ordered products of `m`
//! distinct increments. Its kernel is computed without ever forming tensors:
//!
//! ```text
//! B_1 = κ,   B_{m+1}[i][j] = κ[i][j] · Σ_{i'<i, j'<j} B_m[i'][j']
//! k_{0:m}(x, y) = 1 + Σ_{m'≤m} Σ_{i,j} B_{m'}[i][j]
//! ```
//!
//! The untruncated kernel solves the Goursat problem `∂²u/∂s∂t = κ u` with
//! unit boundary values on a dyadically refined grid.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::static_kernels::{dot, StaticKernel};

/// Largest accepted truncation level.
pub const MAX_TRUNCATION_LEVEL: usize = 12;

fn same_dim(x: &TimeSeries, y: &TimeSeries) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            found: y.dim(),
        });
    }
    Ok(())
}

fn check_scale(scale: f64) -> Result<()> {
    if scale > 0.0 && scale.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "path scale must be positive and finite, got {scale}"
        )))
    }
}

/// Row-major `(T−1) × (L−1)` matrix of base-kernel double increments.
pub fn double_increments(base: &StaticKernel, x: &TimeSeries, y: &TimeSeries) -> Result<Vec<f64>> {
    same_dim(x, y)?;
    let (t, l) = (x.len(), y.len());
    let mut gram = vec![0.0; t * l];
    for i in 0..t {
        for j in 0..l {
            gram[i * l + j] = base.eval_unchecked(x.row(i), y.row(j));
        }
    }
    let (rows, cols) = (t - 1, l - 1);
    let mut kappa = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            kappa[i * cols + j] = gram[(i + 1) * l + j + 1] - gram[(i + 1) * l + j]
                - gram[i * l + j + 1]
                + gram[i * l + j];
        }
    }
    Ok(kappa)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncatedSignature {
    pub base: StaticKernel,
    pub level: usize,
    #[serde(default = "unit_scale")]
    pub scale: f64,
}

fn unit_scale() -> f64 {
    1.0
}

impl TruncatedSignature {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        check_scale(self.scale)?;
        if self.level == 0 {
            return Err(Error::InvalidParameter("truncation level must be >= 1".into()));
        }
        if self.level > MAX_TRUNCATION_LEVEL {
            return Err(Error::LevelTooLarge {
                level: self.level,
                max: MAX_TRUNCATION_LEVEL,
            });
        }
        Ok(())
    }

    /// Kernel on paths that have already been multiplied by `scale`.
    pub fn eval_prescaled(&self, x: &TimeSeries, y: &TimeSeries) -> Result<f64> {
        self.validate()?;
        let kappa = double_increments(&self.base, x, y)?;
        Ok(horner(&kappa, x.len() - 1, y.len() - 1, self.level))
    }

    pub fn eval(&self, x: &TimeSeries, y: &TimeSeries) -> Result<f64> {
        self.eval_prescaled(&x.scaled(self.scale), &y.scaled(self.scale))
    }
}

fn horner(kappa: &[f64], rows: usize, cols: usize, level: usize) -> f64 {
    let mut total = 1.0 + kappa.iter().sum::<f64>();
    if rows == 0 || cols == 0 {
        return total;
    }
    let mut b = kappa.to_vec();
    // prefix[(i+1)*(cols+1) + j+1] = Σ_{i'≤i, j'≤j} b[i'][j']
    let mut prefix = vec![0.0; (rows + 1) * (cols + 1)];
    let w = cols + 1;
    for _ in 2..=level {
        for i in 0..rows {
            for j in 0..cols {
                prefix[(i + 1) * w + j + 1] =
                    b[i * cols + j] + prefix[i * w + j + 1] + prefix[(i + 1) * w + j] - prefix[i * w + j];
            }
        }
        let mut level_sum = 0.0;
        for i in 0..rows {
            for j in 0..cols {
                let v = kappa[i * cols + j] * prefix[i * w + j];
                b[i * cols + j] = v;
                level_sum += v;
            }
        }
        total += level_sum;
    }
    total
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeSignature {
    pub base: StaticKernel,
    #[serde(default = "unit_scale")]
    pub scale: f64,
    #[serde(default = "default_dyadic_order")]
    pub dyadic_order: u32,
    /// Combine the solutions at dyadic orders `r` and `r + 1` by Richardson
    /// extrapolation, cancelling the leading `O(h²)` error term.
    #[serde(default = "default_extrapolate")]
    pub extrapolate: bool,
}

fn default_dyadic_order() -> u32 {
    1
}

fn default_extrapolate() -> bool {
    true
}

const MAX_DYADIC_ORDER: u32 = 10;

impl PdeSignature {
    pub fn new(base: StaticKernel, scale: f64, dyadic_order: u32) -> Self {
        Self {
            base,
            scale,
            dyadic_order,
            extrapolate: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        check_scale(self.scale)?;
        if self.dyadic_order > MAX_DYADIC_ORDER {
            return Err(Error::InvalidParameter(format!(
                "dyadic order {} exceeds {MAX_DYADIC_ORDER}",
                self.dyadic_order
            )));
        }
        Ok(())
    }

    pub fn eval_prescaled(&self, x: &TimeSeries, y: &TimeSeries) -> Result<f64> {
        self.validate()?;
        let kappa = double_increments(&self.base, x, y)?;
        let (rows, cols) = (x.len() - 1, y.len() - 1);
        let coarse = goursat_solve(&kappa, rows, cols, self.dyadic_order)?;
        if !self.extrapolate {
            return Ok(coarse);
        }
        let fine = goursat_solve(&kappa, rows, cols, self.dyadic_order + 1)?;
        let v = (4.0 * fine - coarse) / 3.0;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteSolution)
        }
    }

    pub fn eval(&self, x: &TimeSeries, y: &TimeSeries) -> Result<f64> {
        self.eval_prescaled(&x.scaled(self.scale), &y.scaled(self.scale))
    }
}

/// Explicit second-order scheme for `u_st = κ u`, `u(0,·) = u(·,0) = 1`, on
/// the increment grid refined `2^order` times per cell. Each refined cell
/// carries `Δ = κ[i][j] / 4^order` and is updated as
///
/// ```text
/// u[i+1][j+1] = (u[i+1][j] + u[i][j+1])·(1 + Δ/2 + Δ²/12) − u[i][j]·(1 − Δ²/12)
/// ```
pub fn goursat_solve(kappa: &[f64], rows: usize, cols: usize, order: u32) -> Result<f64> {
    let refine = 1usize << order;
    let scale = 1.0 / (refine * refine) as f64;
    let width = cols * refine + 1;
    let mut prev = vec![1.0; width];
    let mut cur = vec![1.0; width];
    for i in 0..rows * refine {
        cur[0] = 1.0;
        let row = i / refine;
        for j in 0..cols * refine {
            let delta = kappa[row * cols + j / refine] * scale;
            let d2 = delta * delta / 12.0;
            cur[j + 1] = (cur[j] + prev[j + 1]) * (1.0 + 0.5 * delta + d2) - prev[j] * (1.0 - d2);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let v = prev[width - 1];
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteSolution)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomizedSignature {
    /// Number of random features `M`.
    pub width: usize,
    /// Variance of the Gaussian matrix and bias entries.
    pub variance: f64,
    #[serde(default = "unit_scale")]
    pub scale: f64,
    #[serde(default)]
    pub seed: u64,
}

impl RandomizedSignature {
    pub fn validate(&self) -> Result<()> {
        check_scale(self.scale)?;
        if self.width == 0 {
            return Err(Error::InvalidParameter("randomized signature width must be >= 1".into()));
        }
        if !(self.variance > 0.0 && self.variance.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "randomized signature variance must be positive, got {}",
                self.variance
            )));
        }
        Ok(())
    }

    /// Draws the random vector field for inputs of dimension `dim`. The same
    /// seed always yields bit-identical parameters.
    pub fn materialize(&self, dim: usize) -> Result<RandomizedSignatureParams> {
        self.validate()?;
        let m = self.width;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let init = Normal::new(0.0, (1.0 / m as f64).sqrt()).expect("positive std");
        let field = Normal::new(0.0, self.variance.sqrt()).expect("positive std");
        let z0: Vec<f64> = (0..m).map(|_| init.sample(&mut rng)).collect();
        let mut matrices = Vec::with_capacity(dim * m * m);
        let mut biases = Vec::with_capacity(dim * m);
        for _ in 0..dim {
            matrices.extend((0..m * m).map(|_| field.sample(&mut rng)));
            biases.extend((0..m).map(|_| field.sample(&mut rng)));
        }
        Ok(RandomizedSignatureParams {
            dim,
            width: m,
            scale: self.scale,
            z0,
            matrices,
            biases,
        })
    }

    pub fn eval(&self, x: &TimeSeries, y: &TimeSeries) -> Result<f64> {
        same_dim(x, y)?;
        let params = self.materialize(x.dim())?;
        Ok(dot(&params.features(x)?, &params.features(y)?))
    }
}

/// Frozen random parameters of a randomized signature: `z₀ ∈ ℝ^M`,
/// `A_i ∈ ℝ^{M×M}` and `b_i ∈ ℝ^M` for each input channel `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomizedSignatureParams {
    dim: usize,
    width: usize,
    scale: f64,
    z0: Vec<f64>,
    matrices: Vec<f64>,
    biases: Vec<f64>,
}

impl RandomizedSignatureParams {
    pub fn initial_state(&self) -> &[f64] {
        &self.z0
    }

    /// Terminal state of the Euler scheme
    /// `Z_{t+1} = Z_t + Σ_i tanh(A_i Z_t + b_i)·(x^{(i)}_{t+1} − x^{(i)}_t)`
    /// driven by the path scaled by the configured factor.
    pub fn features(&self, x: &TimeSeries) -> Result<Vec<f64>> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.dim(),
            });
        }
        let m = self.width;
        let mut z = self.z0.clone();
        let mut step = vec![0.0; m];
        for t in 1..x.len() {
            let (prev, next) = (x.row(t - 1), x.row(t));
            step.iter_mut().for_each(|s| *s = 0.0);
            for i in 0..self.dim {
                let dx = self.scale * (next[i] - prev[i]);
                if dx == 0.0 {
                    continue;
                }
                let a = &self.matrices[i * m * m..(i + 1) * m * m];
                let b = &self.biases[i * m..(i + 1) * m];
                for r in 0..m {
                    let pre = dot(&a[r * m..(r + 1) * m], &z) + b[r];
                    step[r] += pre.tanh() * dx;
                }
            }
            for (zr, s) in z.iter_mut().zip(&step) {
                *zr += s;
            }
        }
        Ok(z)
    }
}

/// Element of the tensor algebra over ℝ^d truncated at `level`. Level `k`
/// stores `d^k` coefficients with the first tensor factor most significant.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorPoly {
    pub dim: usize,
    pub level: usize,
    pub coefficients: Vec<Vec<f64>>,
}

impl TensorPoly {
    pub fn one(dim: usize, level: usize) -> Self {
        let coefficients = (0..=level)
            .map(|k| {
                let mut c = vec![0.0; dim.pow(k as u32)];
                if k == 0 {
                    c[0] = 1.0;
                }
                c
            })
            .collect();
        Self {
            dim,
            level,
            coefficients,
        }
    }

    /// Right multiplication by `(1 + a)` for a vector `a ∈ ℝ^d`.
    pub fn mul_one_plus(&mut self, a: &[f64]) {
        let d = self.dim;
        for k in (1..=self.level).rev() {
            let (lower, upper) = self.coefficients.split_at_mut(k);
            let src = &lower[k - 1];
            let dst = &mut upper[0];
            for (idx, &c) in src.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                for (j, &aj) in a.iter().enumerate() {
                    dst[idx * d + j] += c * aj;
                }
            }
        }
    }

    /// Level-wise Hilbert-Schmidt inner product.
    pub fn inner(&self, other: &TensorPoly) -> f64 {
        self.coefficients
            .iter()
            .zip(&other.coefficients)
            .map(|(a, b)| dot(a, b))
            .sum()
    }
}

/// Discrete signature `Π_t (1 + Δx_t)` truncated at `level`, computed
/// explicitly. Exponential in `level`; limited to `d ≤ 4`, `level ≤ 6`.
pub fn trunc_sig_explicit(x: &TimeSeries, level: usize) -> Result<TensorPoly> {
    if x.dim() > 4 || level > 6 {
        return Err(Error::OracleTooLarge {
            dim: x.dim(),
            level,
        });
    }
    let mut sig = TensorPoly::one(x.dim(), level);
    let mut inc = vec![0.0; x.dim()];
    for t in 1..x.len() {
        for (k, v) in inc.iter_mut().enumerate() {
            *v = x.row(t)[k] - x.row(t - 1)[k];
        }
        sig.mul_one_plus(&inc);
    }
    Ok(sig)
}
