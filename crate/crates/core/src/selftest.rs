// SPDX-License-Identifier: MIT OR Apache-2.0

//! Embedded oracle checks run by the `selftest` command.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::kernel::{KernelFamily, KernelSpec};
use crate::linalg::{eig_sym, mahalanobis_pinv, SymMatrix, DEFAULT_EIGEN_THRESHOLD};
use crate::oracle::{bessel_series, gak_by_enumeration, vrk_direct_sum};
use crate::series::TimeSeries;
use crate::sig_kernels::{trunc_sig_explicit, PdeSignature, TruncatedSignature};
use crate::static_kernels::StaticKernel;
use crate::ts_kernels::{gak_linear_unnormalized, vrk_eval};
use crate::variance_model::{chi2_mixture_moments, FitConfig, VarianceModel};

/// Relative tolerances, one per check.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub two_point: f64,
    pub eigen: f64,
    pub pinv: f64,
    pub gak: f64,
    pub signature: f64,
    pub pde: f64,
    pub vrk: f64,
    pub chi2: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            two_point: 1e-10,
            eigen: 1e-10,
            pinv: 1e-8,
            gak: 1e-12,
            signature: 1e-10,
            pde: 1e-4,
            vrk: 1e-14,
            chi2: 1e-15,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    /// Worst relative error observed, or the error message.
    pub detail: String,
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs())
}

fn series(rng: &mut ChaCha8Rng, len: usize, dim: usize, scale: f64) -> TimeSeries {
    TimeSeries::new(len, dim, (0..len * dim).map(|_| scale * rng.random_range(-1.0..1.0)).collect())
        .expect("finite values")
}

fn two_point() -> Result<f64> {
    let pts = |v: &[f64]| -> Vec<TimeSeries> { v.iter().map(|&x| TimeSeries::univariate(&[x]).unwrap()).collect() };
    let spec = KernelSpec::new(KernelFamily::Flattened { base: StaticKernel::Linear }, false);
    let model = VarianceModel::fit(pts(&[0.0, 2.0]), spec, FitConfig::default())?;
    let y = &pts(&[3.0])[0];
    let got = [
        model.mahalanobis(0.0, y)?,
        model.conformance(0.0, y)?,
        model.mahalanobis(1.0, y)?,
        model.conformance(1.0, y)?,
    ];
    Ok(got.iter().zip([2.0, 1.0, 1.0, 0.5]).map(|(g, e)| rel(*g, e)).fold(0.0, f64::max))
}

fn eigen(rng: &mut ChaCha8Rng) -> Result<f64> {
    let a = SymMatrix::from_row_major(2, vec![2.0, 1.0, 1.0, 2.0])?;
    let e = eig_sym(&a)?;
    let mut worst = rel(e.eigenvalues[0], 3.0).max(rel(e.eigenvalues[1], 1.0));
    let n = 8;
    let g: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let psd = SymMatrix::from_fn(n, |i, j| (0..n).map(|k| g[i * n + k] * g[j * n + k]).sum())?;
    let e = eig_sym(&psd)?;
    worst = worst.max(e.reconstruction_residual(&psd) / psd.frobenius_norm());
    Ok(worst)
}

fn pinv(rng: &mut ChaCha8Rng) -> Result<f64> {
    let spec = KernelSpec::new(KernelFamily::Flattened { base: StaticKernel::Linear }, false);
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let corpus: Vec<TimeSeries> = (0..10).map(|_| series(rng, 1, 3, 2.0)).collect();
        let rows: Vec<Vec<f64>> = corpus.iter().map(|s| s.flat().to_vec()).collect();
        let y = series(rng, 1, 3, 2.0);
        let oracle = mahalanobis_pinv(&rows, y.flat(), DEFAULT_EIGEN_THRESHOLD)?;
        let model = VarianceModel::fit(corpus, spec.clone(), FitConfig::default())?;
        worst = worst.max(rel(model.mahalanobis(0.0, &y)?, oracle));
    }
    Ok(worst)
}

fn gak(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let x = series(rng, 3, 2, 1.0);
        let y = series(rng, 3, 2, 1.0);
        worst = worst.max(rel(gak_linear_unnormalized(0.9, &x, &y)?, gak_by_enumeration(0.9, &x, &y)));
    }
    Ok(worst)
}

fn signature(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for level in 1..=4 {
        let x = series(rng, 5, 2, 0.7);
        let y = series(rng, 4, 2, 0.7);
        let k = TruncatedSignature {
            base: StaticKernel::Linear,
            level,
            scale: 1.0,
        };
        let oracle = trunc_sig_explicit(&x, level)?.inner(&trunc_sig_explicit(&y, level)?);
        worst = worst.max(rel(k.eval(&x, &y)?, oracle));
    }
    Ok(worst)
}

fn pde() -> Result<f64> {
    let k = PdeSignature::new(StaticKernel::Linear, 1.0, 2);
    let mut worst: f64 = 0.0;
    for c in [-0.5, 0.0, 0.5, 1.0] {
        let x = TimeSeries::from_rows(&[[0.0, 0.0], [c, 0.0]])?;
        let y = TimeSeries::from_rows(&[[0.0, 0.0], [1.0, 0.0]])?;
        worst = worst.max(rel(k.eval(&x, &y)?, bessel_series(c)));
    }
    Ok(worst)
}

fn vrk(rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for len in 1..=10 {
        let x = series(rng, len, 2, 0.5);
        let y = series(rng, len, 2, 0.5);
        worst = worst.max(rel(vrk_eval(0.8, 0.7, &x, &y)?, vrk_direct_sum(0.8, 0.7, &x, &y)));
    }
    Ok(worst)
}

fn chi2() -> Result<f64> {
    let cases: [(&[f64], f64, (f64, f64)); 3] = [
        (&[1.0], 0.0, (1.0, 2.0)),
        (&[1.0], 1.0, (0.25, 0.125)),
        (&[2.0, 1.0], 0.0, (2.0, 4.0)),
    ];
    Ok(cases
        .iter()
        .map(|(l, a, (m, v))| {
            let (gm, gv) = chi2_mixture_moments(l, *a);
            rel(gm, *m).max(rel(gv, *v))
        })
        .fold(0.0, f64::max))
}

/// Runs every check; never panics on a failed check.
pub fn run(tol: &Tolerances) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);
    let checks: Vec<(&'static str, f64, Result<f64>)> = vec![
        ("two_point_example", tol.two_point, two_point()),
        ("jacobi_eigen", tol.eigen, eigen(&mut rng)),
        ("pinv_oracle", tol.pinv, pinv(&mut rng)),
        ("gak_enumeration", tol.gak, gak(&mut rng)),
        ("signature_tensor", tol.signature, signature(&mut rng)),
        ("pde_bessel", tol.pde, pde()),
        ("vrk_direct_sum", tol.vrk, vrk(&mut rng)),
        ("chi2_moments", tol.chi2, chi2()),
    ];
    checks
        .into_iter()
        .map(|(name, tol, outcome)| match outcome {
            Ok(err) => CheckResult {
                name,
                passed: err <= tol,
                detail: format!("max rel err {err:.3e} (tol {tol:.0e})"),
            },
            Err(e) => CheckResult {
                name,
                passed: false,
                detail: e.to_string(),
            },
        })
        .collect()
}

pub fn render(results: &[CheckResult]) -> String {
    let mut s = String::new();
    for r in results {
        let _ = writeln!(s, "{:<20} {}  {}", r.name, if r.passed { "PASS" } else { "FAIL" }, r.detail);
    }
    s
}
