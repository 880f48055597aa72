// SPDX-License-Identifier: MIT OR Apache-2.0

//! Brute-force reference computations. These deliberately avoid the
//! recursions used by the kernels so they can check them; they are exposed
//! for the test suites and the `selftest` command, not for production use.

use crate::series::TimeSeries;
use crate::static_kernels::{dot, StaticKernel};

/// Unnormalized global alignment kernel as an explicit sum over every
/// monotone alignment of `x` and `y`. Exponential in the lengths.
pub fn gak_by_enumeration(sigma: f64, x: &TimeSeries, y: &TimeSeries) -> f64 {
    let rbf = StaticKernel::Rbf { sigma };
    let kappa = |i: usize, j: usize| {
        let k = rbf.eval_unchecked(x.row(i), y.row(j));
        k / (2.0 - k)
    };
    fn walk(i: usize, j: usize, t: usize, l: usize, kappa: &dyn Fn(usize, usize) -> f64) -> f64 {
        let here = kappa(i, j);
        if i + 1 == t && j + 1 == l {
            return here;
        }
        let mut tail = 0.0;
        if i + 1 < t {
            tail += walk(i + 1, j, t, l, kappa);
        }
        if j + 1 < l {
            tail += walk(i, j + 1, t, l, kappa);
        }
        if i + 1 < t && j + 1 < l {
            tail += walk(i + 1, j + 1, t, l, kappa);
        }
        here * tail
    }
    walk(0, 0, x.len(), y.len(), &kappa)
}

/// Number of monotone alignments between lengths `t` and `l` (Delannoy number).
pub fn alignment_count(t: usize, l: usize) -> u64 {
    let mut d = vec![vec![0u64; l]; t];
    for i in 0..t {
        for j in 0..l {
            d[i][j] = if i == 0 || j == 0 {
                1
            } else {
                d[i - 1][j] + d[i][j - 1] + d[i - 1][j - 1]
            };
        }
    }
    d[t - 1][l - 1]
}

/// Volterra reservoir kernel evaluated term by term in `O(T²)`.
pub fn vrk_direct_sum(tau: f64, lambda: f64, x: &TimeSeries, y: &TimeSeries) -> f64 {
    let len = x.len();
    let mut total = 1.0;
    for k in 1..=len {
        let mut prod = 1.0;
        for t in 0..k {
            let s = len - 1 - t;
            prod *= 1.0 / (1.0 - tau * tau * dot(x.row(s), y.row(s)));
        }
        total += lambda.powi(2 * k as i32) * prod;
    }
    total
}

/// `Σ_{m≥0} c^m / (m!)²`, the signature kernel of two straight segments
/// whose increments have inner product `c`. Summed until terms vanish.
pub fn bessel_series(c: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for m in 1..200 {
        term *= c / (m as f64 * m as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn delannoy_numbers() {
        assert_eq!(alignment_count(1, 1), 1);
        assert_eq!(alignment_count(2, 1), 1);
        assert_eq!(alignment_count(2, 2), 3);
        assert_eq!(alignment_count(3, 3), 13);
        assert_eq!(alignment_count(4, 4), 63);
    }

    #[test]
    fn enumeration_counts_alignments_at_unit_similarity() {
        // Very wide bandwidth: κ -> 1, so the sum counts alignments.
        let x = TimeSeries::univariate(&[0.0, 0.1, 0.2]).unwrap();
        let y = TimeSeries::univariate(&[0.0, 0.1, 0.2]).unwrap();
        let v = gak_by_enumeration(1e8, &x, &y);
        assert!((v - 13.0).abs() < 1e-9);
    }

    #[test]
    fn bessel_values() {
        assert_eq!(bessel_series(0.0), 1.0);
        assert!((bessel_series(1.0) - 2.279_585_302_336_067).abs() < 1e-15);
    }
}
