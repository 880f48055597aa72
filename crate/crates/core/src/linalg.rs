// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense symmetric linear algebra.
//!
//! The eigensolver is a cyclic Jacobi method: every sweep visits each
//! off-diagonal pair `(p, q)` once and annihilates it with a plane rotation
//! `A <- Jᵀ A J`, accumulating `V <- V J`. It stops once the Frobenius norm of
//! the off-diagonal part falls below `1e-12 · ‖A‖_F`.
//!
//! The module also carries the finite-dimensional Mahalanobis distance built
//! directly from the sample covariance matrix. It shares the eigenvalue
//! threshold rule with the kernelized model so the two can be compared.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default cutoff below which eigenvalues are treated as zero.
pub const DEFAULT_EIGEN_THRESHOLD: f64 = 1e-10;

const SYMMETRY_TOL: f64 = 1e-12;
const OFF_DIAGONAL_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;
const CLAMP_WINDOW: f64 = 1e-10;

/// Real symmetric matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    /// Wraps row-major entries, checking symmetry against
    /// `1e-12 · max|entry|`. The stored matrix is exactly symmetrized.
    pub fn from_row_major(n: usize, mut entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("matrix order must be positive".into()));
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("matrix has non-finite entries".into()));
        }
        let scale = entries.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut asymmetry = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                asymmetry = asymmetry.max((entries[i * n + j] - entries[j * n + i]).abs());
            }
        }
        if asymmetry > SYMMETRY_TOL * scale {
            return Err(Error::NonSymmetric { asymmetry });
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let avg = 0.5 * (entries[i * n + j] + entries[j * n + i]);
                entries[i * n + j] = avg;
                entries[j * n + i] = avg;
            }
        }
        Ok(Self { n, entries })
    }

    /// Builds a matrix from a function of the (row, column) index pair,
    /// evaluated on the upper triangle and mirrored.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self::from_row_major(n, entries)
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }
}

/// Eigenpairs of a symmetric matrix, eigenvalues sorted non-increasing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomp {
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    /// Row-major `n × n`; column `m` pairs with `eigenvalues[m]`.
    pub eigenvectors: Vec<f64>,
}

impl EigenDecomp {
    pub fn vector_component(&self, i: usize, m: usize) -> f64 {
        self.eigenvectors[i * self.n + m]
    }

    pub fn column(&self, m: usize) -> Vec<f64> {
        (0..self.n).map(|i| self.vector_component(i, m)).collect()
    }

    /// Number of eigenvalues strictly above `threshold`.
    pub fn rank_above(&self, threshold: f64) -> usize {
        self.eigenvalues.iter().take_while(|&&l| l > threshold).count()
    }

    /// `‖A − V diag(λ) Vᵀ‖_F`.
    pub fn reconstruction_residual(&self, a: &SymMatrix) -> f64 {
        let n = self.n;
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                let mut v = 0.0;
                for m in 0..n {
                    v += self.vector_component(i, m)
                        * self.eigenvalues[m]
                        * self.vector_component(j, m);
                }
                let d = a.get(i, j) - v;
                sum += d * d;
            }
        }
        sum.sqrt()
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues in `(−1e-10·‖A‖_F, 0)` are clamped to zero. Larger negative
/// eigenvalues are returned as computed; use [`eig_psd`] to reject them.
pub fn eig_sym(a: &SymMatrix) -> Result<EigenDecomp> {
    eig_sym_floor(a, 0.0)
}

fn eig_sym_floor(a: &SymMatrix, floor: f64) -> Result<EigenDecomp> {
    let n = a.n;
    let norm = a.frobenius_norm();
    let mut w = a.entries.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let tol = OFF_DIAGONAL_TOL * norm;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&w, n) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut w, &mut v, n, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&w, n) > tol {
        return Err(Error::ConvergenceFailure { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| w[j * n + j].total_cmp(&w[i * n + i]).then(i.cmp(&j)));

    let clamp = (CLAMP_WINDOW * norm).max(floor);
    let eigenvalues = order
        .iter()
        .map(|&k| {
            let l = w[k * n + k];
            if l < 0.0 && l > -clamp {
                0.0
            } else {
                l
            }
        })
        .collect();
    let mut eigenvectors = vec![0.0; n * n];
    for (m, &k) in order.iter().enumerate() {
        for i in 0..n {
            eigenvectors[i * n + m] = v[i * n + k];
        }
    }
    Ok(EigenDecomp {
        n,
        eigenvalues,
        eigenvectors,
    })
}

/// [`eig_sym`] for matrices that must be positive semi-definite, such as
/// centered Gram matrices. Any eigenvalue left negative after clamping is
/// an error.
pub fn eig_psd(a: &SymMatrix) -> Result<EigenDecomp> {
    eig_psd_floor(a, 0.0)
}

/// [`eig_psd`] with the clamping window widened to at least `floor`.
///
/// A matrix formed by cancellation, like a centered Gram matrix, carries
/// rounding noise on the scale of its inputs rather than of its own norm;
/// `floor` expresses that scale.
pub fn eig_psd_floor(a: &SymMatrix, floor: f64) -> Result<EigenDecomp> {
    let eig = eig_sym_floor(a, floor)?;
    match eig.eigenvalues.last() {
        Some(&l) if l < 0.0 => Err(Error::Indefinite { eigenvalue: l }),
        _ => Ok(eig),
    }
}

fn off_diagonal_norm(w: &[f64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += w[i * n + j] * w[i * n + j];
            }
        }
    }
    s.sqrt()
}

fn rotate(w: &mut [f64], v: &mut [f64], n: usize, p: usize, q: usize) {
    let apq = w[p * n + q];
    if apq == 0.0 {
        return;
    }
    let app = w[p * n + p];
    let aqq = w[q * n + q];
    let theta = (aqq - app) / (2.0 * apq);
    let t = if theta.is_infinite() {
        0.0
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    // A <- A J
    for k in 0..n {
        let akp = w[k * n + p];
        let akq = w[k * n + q];
        w[k * n + p] = c * akp - s * akq;
        w[k * n + q] = s * akp + c * akq;
    }
    // A <- Jᵀ A
    for k in 0..n {
        let apk = w[p * n + k];
        let aqk = w[q * n + k];
        w[p * n + k] = c * apk - s * aqk;
        w[q * n + k] = s * apk + c * aqk;
    }
    w[p * n + q] = 0.0;
    w[q * n + p] = 0.0;

    for k in 0..n {
        let vkp = v[k * n + p];
        let vkq = v[k * n + q];
        v[k * n + p] = c * vkp - s * vkq;
        v[k * n + q] = s * vkp + c * vkq;
    }
}

/// Mean and biased (`1/N`) covariance of a set of vectors.
pub fn sample_covariance<V: AsRef<[f64]>>(points: &[V]) -> Result<(Vec<f64>, SymMatrix)> {
    let first = points.first().ok_or(Error::EmptyStats)?;
    let d = first.as_ref().len();
    if d == 0 {
        return Err(Error::InvalidParameter("vectors must be non-empty".into()));
    }
    for p in points {
        if p.as_ref().len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.as_ref().len(),
            });
        }
    }
    let n = points.len() as f64;
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, x) in mean.iter_mut().zip(p.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut cov = vec![0.0; d * d];
    for p in points {
        let p = p.as_ref();
        for i in 0..d {
            let di = p[i] - mean[i];
            for j in i..d {
                cov[i * d + j] += di * (p[j] - mean[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i * d + j] / n;
            cov[i * d + j] = v;
            cov[j * d + i] = v;
        }
    }
    Ok((mean, SymMatrix::from_row_major(d, cov)?))
}

/// Classical (possibly degenerate) Mahalanobis distance of `y` to a point
/// cloud, using the pseudo-inverse of the biased sample covariance restricted
/// to eigenvalues above `threshold`.
///
/// Returns `f64::INFINITY` when `y − mean` has a component orthogonal to the
/// range of the covariance larger than `1e-8 · (1 + ‖y − mean‖)`.
pub fn mahalanobis_pinv<V: AsRef<[f64]>>(corpus: &[V], y: &[f64], threshold: f64) -> Result<f64> {
    let (squared, off_range) = pinv_quadratic_form(corpus, y, threshold, |_| 1.0)?;
    Ok(if off_range { f64::INFINITY } else { squared.sqrt() })
}

/// Primal-space α-regularized variance norm of `y − mean`:
/// `√(Σ_m (λ_m/(λ_m+α))² ⟨v_m, y−mean⟩²/λ_m)` over eigenvalues above
/// `threshold`. Always finite; the off-range component is projected away.
pub fn regularized_variance_norm<V: AsRef<[f64]>>(
    corpus: &[V],
    y: &[f64],
    alpha: f64,
    threshold: f64,
) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be >= 0, got {alpha}")));
    }
    let (squared, _) = pinv_quadratic_form(corpus, y, threshold, |l| {
        let r = l / (l + alpha);
        r * r
    })?;
    Ok(squared.sqrt())
}

fn pinv_quadratic_form<V: AsRef<[f64]>>(
    corpus: &[V],
    y: &[f64],
    threshold: f64,
    shrink: impl Fn(f64) -> f64,
) -> Result<(f64, bool)> {
    let (mean, cov) = sample_covariance(corpus)?;
    let d = mean.len();
    if y.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: y.len(),
        });
    }
    let eig = eig_sym(&cov)?;
    let z: Vec<f64> = y.iter().zip(&mean).map(|(a, b)| a - b).collect();
    let z_norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let rank = eig.rank_above(threshold);

    let mut projected = vec![0.0; d];
    let mut squared = 0.0;
    for m in 0..rank {
        let lambda = eig.eigenvalues[m];
        let coord: f64 = (0..d).map(|i| eig.vector_component(i, m) * z[i]).sum();
        squared += shrink(lambda) * coord * coord / lambda;
        for (i, p) in projected.iter_mut().enumerate() {
            *p += coord * eig.vector_component(i, m);
        }
    }
    let residual = z
        .iter()
        .zip(&projected)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok((squared, residual > 1e-8 * (1.0 + z_norm)))
}
