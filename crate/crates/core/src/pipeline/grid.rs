// SPDX-License-Identifier: MIT OR Apache-2.0

//! Hyper-parameter grids and repeated k-fold model selection.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{pr_auc, roc_auc};
use super::preprocess::{PreprocConfig, Preprocessor};
use super::LabeledSet;
use crate::error::{Error, Result};
use crate::kernel::{KernelFamily, KernelSpec};
use crate::series::TimeSeries;
use crate::sig_kernels::{PdeSignature, RandomizedSignature, TruncatedSignature};
use crate::static_kernels::StaticKernel;
use crate::ts_kernels::median_pairwise_distance;
use crate::variance_model::{FitConfig, ScoreMethod, ScorerConfig, VarianceModel, DEFAULT_MAX_EIGEN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaseChoice {
    Linear,
    Rbf,
    Polynomial,
}

/// Kernel family searched by [`grid_search`], including the static base
/// kernel where the family has one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FamilyChoice {
    Flattened(BaseChoice),
    Integral(BaseChoice),
    Gak,
    Vrk,
    TruncatedSignature(BaseChoice),
    PdeSignature(BaseChoice),
    RandomizedSignature,
}

impl FamilyChoice {
    pub fn all() -> Vec<FamilyChoice> {
        use BaseChoice::*;
        use FamilyChoice::*;
        let mut out = Vec::new();
        for b in [Linear, Rbf, Polynomial] {
            out.push(Flattened(b));
        }
        for b in [Linear, Rbf, Polynomial] {
            out.push(Integral(b));
        }
        out.push(Gak);
        out.push(Vrk);
        for b in [Linear, Rbf] {
            out.push(TruncatedSignature(b));
        }
        for b in [Linear, Rbf] {
            out.push(PdeSignature(b));
        }
        out.push(RandomizedSignature);
        out
    }
}

fn base_name(b: BaseChoice) -> &'static str {
    match b {
        BaseChoice::Linear => "linear",
        BaseChoice::Rbf => "rbf",
        BaseChoice::Polynomial => "polynomial",
    }
}

impl fmt::Display for FamilyChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyChoice::Flattened(b) => write!(f, "flattened_{}", base_name(*b)),
            FamilyChoice::Integral(b) => write!(f, "integral_{}", base_name(*b)),
            FamilyChoice::Gak => f.write_str("gak"),
            FamilyChoice::Vrk => f.write_str("vrk"),
            FamilyChoice::TruncatedSignature(b) => write!(f, "truncated_signature_{}", base_name(*b)),
            FamilyChoice::PdeSignature(b) => write!(f, "pde_signature_{}", base_name(*b)),
            FamilyChoice::RandomizedSignature => f.write_str("randomized_signature"),
        }
    }
}

impl FromStr for FamilyChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        FamilyChoice::all()
            .into_iter()
            .find(|f| f.to_string() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown kernel family {s:?}")))
    }
}

impl TryFrom<String> for FamilyChoice {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FamilyChoice> for String {
    fn from(f: FamilyChoice) -> String {
        f.to_string()
    }
}

fn geomspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    let (a, b) = (start.ln(), end.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

fn e_grid() -> Vec<f64> {
    let e = std::f64::consts::E;
    vec![e.powi(-2), e.powi(-1), 1.0, e, e * e]
}

/// Per-family hyper-parameter lists. Values marked "per √d" are divided by
/// the square root of the preprocessed state dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelGrid {
    /// RBF bandwidths, per √d.
    pub rbf_sigma: Vec<f64>,
    pub poly_degree: Vec<u32>,
    pub poly_offset: Vec<f64>,
    /// GAK bandwidths, multiplied by `√T` times the median pairwise
    /// distance of the normal training states.
    pub gak_sigma: Vec<f64>,
    pub gak_median_samples: usize,
    /// VRK `τ`, per √d.
    pub vrk_tau: Vec<f64>,
    pub vrk_lambda: Vec<f64>,
    pub sig_level: Vec<usize>,
    /// Truncated-signature path scales, per √d.
    pub sig_scale: Vec<f64>,
    /// PDE-signature path scales, per √d.
    pub pde_scale: Vec<f64>,
    pub pde_dyadic_order: u32,
    pub rand_width: Vec<usize>,
    pub rand_variance: Vec<f64>,
    /// Number of random initializations; seeds are `seed, seed + 1, …`.
    pub rand_seeds: usize,
}

impl Default for KernelGrid {
    fn default() -> Self {
        Self {
            rbf_sigma: e_grid(),
            poly_degree: vec![2, 3, 4],
            poly_offset: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            gak_sigma: e_grid(),
            gak_median_samples: 1000,
            vrk_tau: vec![0.125, 0.25, 0.5, 1.0],
            vrk_lambda: geomspace(0.75, 0.001, 10).into_iter().map(|v| 1.0 - v).collect(),
            sig_level: (1..=7).collect(),
            sig_scale: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            pde_scale: vec![0.125, 0.25, 0.5, 1.0],
            pde_dyadic_order: 1,
            rand_width: vec![10, 25, 50, 100, 200],
            rand_variance: geomspace(1e-5, 1.0, 8),
            rand_seeds: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSpec {
    pub kernels: KernelGrid,
    pub alpha: Vec<f64>,
    pub threshold: Vec<f64>,
    pub add_time: Vec<bool>,
    pub folds: usize,
    pub repeats: usize,
    pub seed: u64,
    pub normalize: bool,
    pub max_eigen: usize,
    /// Base preprocessing; `add_time` is taken from the grid instead.
    pub preprocessing: PreprocConfig,
    pub roc_weight: f64,
    pub pr_weight: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            kernels: KernelGrid::default(),
            alpha: vec![1e-8, 1e-5, 1e-2],
            threshold: vec![1e-10, 1e-6, 1e-3],
            add_time: vec![false, true],
            folds: 4,
            repeats: 10,
            seed: 0,
            normalize: true,
            max_eigen: DEFAULT_MAX_EIGEN,
            preprocessing: PreprocConfig::default(),
            roc_weight: 1.0,
            pr_weight: 1.0,
        }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.alpha.is_empty() || self.threshold.is_empty() || self.add_time.is_empty() {
            return bad("alpha, threshold and add_time grids must be non-empty");
        }
        if self.alpha.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return bad("alpha values must be finite and >= 0");
        }
        if self.threshold.iter().any(|t| !(*t >= 0.0)) {
            return bad("threshold values must be >= 0");
        }
        if self.folds < 2 {
            return bad("folds must be >= 2");
        }
        if self.repeats == 0 {
            return bad("repeats must be >= 1");
        }
        if self.max_eigen == 0 {
            return bad("max_eigen must be >= 1");
        }
        if !(self.roc_weight >= 0.0 && self.pr_weight >= 0.0) {
            return bad("objective weights must be >= 0");
        }
        self.preprocessing.validate()
    }

    fn min_threshold(&self) -> f64 {
        self.threshold.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// One fully specified configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Candidate {
    pub preprocessing: PreprocConfig,
    pub kernel: KernelSpec,
    pub fit: FitConfig,
    pub scorer: ScorerConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Candidate,
    /// Mean cross-validated objective of `best`.
    pub cv_score: f64,
    pub candidates: usize,
    /// Candidates that failed on every split.
    pub failed_candidates: usize,
    pub fits: usize,
}

fn bases(choice: BaseChoice, grid: &KernelGrid, dim: usize) -> Result<Vec<StaticKernel>> {
    let root = (dim as f64).sqrt();
    let out: Vec<StaticKernel> = match choice {
        BaseChoice::Linear => vec![StaticKernel::Linear],
        BaseChoice::Rbf => grid.rbf_sigma.iter().map(|s| StaticKernel::Rbf { sigma: s / root }).collect(),
        BaseChoice::Polynomial => grid
            .poly_degree
            .iter()
            .flat_map(|&degree| {
                grid.poly_offset
                    .iter()
                    .map(move |&offset| StaticKernel::Polynomial { degree, offset })
            })
            .collect(),
    };
    if out.is_empty() {
        return Err(Error::InvalidParameter(format!("empty {} grid", base_name(choice))));
    }
    Ok(out)
}

/// Expands the kernel grid of `family` for preprocessed data of state
/// dimension `dim` and length `len`. `normals` feeds data-dependent scales.
pub fn expand_kernels(
    family: FamilyChoice,
    grid: &GridSpec,
    dim: usize,
    len: usize,
    normals: &[TimeSeries],
) -> Result<Vec<KernelSpec>> {
    let g = &grid.kernels;
    let root = (dim as f64).sqrt();
    let families: Vec<KernelFamily> = match family {
        FamilyChoice::Flattened(b) => bases(b, g, dim)?.into_iter().map(|base| KernelFamily::Flattened { base }).collect(),
        FamilyChoice::Integral(b) => bases(b, g, dim)?.into_iter().map(|base| KernelFamily::Integral { base }).collect(),
        FamilyChoice::Gak => {
            let med = median_pairwise_distance(normals, g.gak_median_samples, grid.seed)?;
            let med = if med > 0.0 { med } else { 1.0 };
            let factor = (len as f64).sqrt() * med;
            g.gak_sigma.iter().map(|s| KernelFamily::Gak { sigma: s * factor }).collect()
        }
        FamilyChoice::Vrk => g
            .vrk_tau
            .iter()
            .flat_map(|t| g.vrk_lambda.iter().map(move |&lambda| KernelFamily::Vrk { tau: t / root, lambda }))
            .collect(),
        FamilyChoice::TruncatedSignature(b) => {
            let mut out = Vec::new();
            for base in bases(b, g, dim)? {
                for &level in &g.sig_level {
                    for s in &g.sig_scale {
                        out.push(KernelFamily::TruncatedSignature(TruncatedSignature {
                            base,
                            level,
                            scale: s / root,
                        }));
                    }
                }
            }
            out
        }
        FamilyChoice::PdeSignature(b) => {
            let mut out = Vec::new();
            for base in bases(b, g, dim)? {
                for s in &g.pde_scale {
                    out.push(KernelFamily::PdeSignature(PdeSignature::new(base, s / root, g.pde_dyadic_order)));
                }
            }
            out
        }
        FamilyChoice::RandomizedSignature => {
            let mut out = Vec::new();
            for &width in &g.rand_width {
                for &variance in &g.rand_variance {
                    for i in 0..g.rand_seeds as u64 {
                        out.push(KernelFamily::RandomizedSignature(RandomizedSignature {
                            width,
                            variance,
                            scale: 1.0,
                            seed: grid.seed.wrapping_add(i),
                        }));
                    }
                }
            }
            out
        }
    };
    if families.is_empty() {
        return Err(Error::InvalidParameter(format!("kernel grid for {family} is empty")));
    }
    Ok(families.into_iter().map(|k| KernelSpec::new(k, grid.normalize)).collect())
}

/// Fold assignments: `(fit indices, held-out indices)` per repeat and fold.
/// Only normals are split; every non-normal sample is held out each time.
fn make_splits(normals: &[usize], others: &[usize], folds: usize, repeats: usize, seed: u64) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(folds * repeats);
    for _ in 0..repeats {
        let mut perm = normals.to_vec();
        perm.shuffle(&mut rng);
        for f in 0..folds {
            let mut fit = Vec::new();
            let mut held = Vec::new();
            for (pos, &i) in perm.iter().enumerate() {
                if pos % folds == f {
                    held.push(i);
                } else {
                    fit.push(i);
                }
            }
            held.extend_from_slice(others);
            out.push((fit, held));
        }
    }
    out
}

struct Group {
    preprocessing: PreprocConfig,
    kernel: KernelSpec,
    data: usize,
}

/// Objective values for every `(threshold, alpha)` pair, plus the first
/// error encountered.
type UnitResult = (Vec<Option<f64>>, Option<String>);

fn eval_unit(
    data: &[TimeSeries],
    kernel: &KernelSpec,
    split: &(Vec<usize>, Vec<usize>),
    outlier: &[bool],
    grid: &GridSpec,
    method: ScoreMethod,
) -> UnitResult {
    let combos = grid.threshold.len() * grid.alpha.len();
    let fail = |e: Error| (vec![None; combos], Some(e.to_string()));
    let (fit_idx, held_idx) = split;
    let corpus: Vec<TimeSeries> = fit_idx.iter().map(|&i| data[i].clone()).collect();
    let fit = FitConfig {
        threshold: grid.min_threshold(),
        max_eigen: grid.max_eigen,
    };
    let model = match VarianceModel::fit(corpus, kernel.clone(), fit) {
        Ok(m) => m,
        Err(e) => return fail(e),
    };
    let mut coords = Vec::with_capacity(held_idx.len());
    for &i in held_idx {
        match model.eigen_coords(&data[i]) {
            Ok(c) => coords.push(c),
            Err(e) => return fail(e),
        }
    }
    let labels: Vec<bool> = held_idx.iter().map(|&i| outlier[i]).collect();
    let mut first_err = None;
    let mut out = Vec::with_capacity(combos);
    for &thr in &grid.threshold {
        let k = model.retained_for(thr);
        for &alpha in &grid.alpha {
            let scores: Vec<f64> = coords.iter().map(|c| model.score_prefix(c, method, alpha, k)).collect();
            let value = roc_auc(&scores, &labels)
                .and_then(|roc| pr_auc(&scores, &labels).map(|pr| grid.roc_weight * roc + grid.pr_weight * pr));
            match value {
                Ok(v) => out.push(Some(v)),
                Err(e) => {
                    first_err.get_or_insert_with(|| e.to_string());
                    out.push(None);
                }
            }
        }
    }
    (out, first_err)
}

/// Repeated k-fold search over the grid of `family`, treating
/// `normal_class` as the normal corpus. Ties go to the earliest grid point.
pub fn grid_search(
    train: &LabeledSet,
    normal_class: &str,
    grid: &GridSpec,
    method: ScoreMethod,
    family: FamilyChoice,
) -> Result<SearchResult> {
    grid.validate()?;
    let normals: Vec<usize> = train.indices_of(normal_class);
    if normals.len() < grid.folds.max(2) {
        return Err(Error::InsufficientNormals {
            class: normal_class.to_string(),
            got: normals.len(),
            needed: grid.folds.max(2),
        });
    }
    let others: Vec<usize> = (0..train.len()).filter(|&i| train.labels[i] != normal_class).collect();
    if others.is_empty() {
        return Err(Error::SingleClass);
    }
    let outlier: Vec<bool> = train.labels.iter().map(|l| l != normal_class).collect();
    let splits = make_splits(&normals, &others, grid.folds, grid.repeats, grid.seed);

    let normal_raw: Vec<TimeSeries> = normals.iter().map(|&i| train.series[i].clone()).collect();
    let mut datasets = Vec::new();
    let mut groups = Vec::new();
    for &add_time in &grid.add_time {
        let cfg = PreprocConfig {
            add_time,
            ..grid.preprocessing
        };
        let pre = Preprocessor::fit(cfg, &normal_raw)?;
        let data = pre.apply_all(&train.series)?;
        let normal_data: Vec<TimeSeries> = normals.iter().map(|&i| data[i].clone()).collect();
        let len = data.iter().map(|s| s.len()).max().unwrap_or(1);
        for kernel in expand_kernels(family, grid, pre.output_dim(), len, &normal_data)? {
            groups.push(Group {
                preprocessing: cfg,
                kernel,
                data: datasets.len(),
            });
        }
        datasets.push(data);
    }

    let units: Vec<(usize, usize)> = (0..groups.len())
        .flat_map(|g| (0..splits.len()).map(move |s| (g, s)))
        .collect();
    let results: Vec<UnitResult> = units
        .par_iter()
        .map(|&(g, s)| {
            let group = &groups[g];
            eval_unit(&datasets[group.data], &group.kernel, &splits[s], &outlier, grid, method)
        })
        .collect();

    let combos = grid.threshold.len() * grid.alpha.len();
    let mut best: Option<(usize, usize, f64)> = None;
    let mut failed_candidates = 0;
    let mut first_err = None;
    for g in 0..groups.len() {
        let unit = &results[g * splits.len()..(g + 1) * splits.len()];
        for c in 0..combos {
            let (mut sum, mut count) = (0.0, 0usize);
            for (vals, err) in unit {
                if let Some(v) = vals[c] {
                    sum += v;
                    count += 1;
                } else if first_err.is_none() {
                    first_err = err.clone();
                }
            }
            if count == 0 {
                failed_candidates += 1;
                continue;
            }
            let mean = sum / count as f64;
            if best.is_none_or(|(_, _, b)| mean > b) {
                best = Some((g, c, mean));
            }
        }
    }
    let (g, c, cv_score) = best.ok_or_else(|| {
        Error::NoViableGridPoint(first_err.unwrap_or_else(|| "no candidates evaluated".into()))
    })?;
    let group = &groups[g];
    Ok(SearchResult {
        best: Candidate {
            preprocessing: group.preprocessing,
            kernel: group.kernel.clone(),
            fit: FitConfig {
                threshold: grid.threshold[c / grid.alpha.len()],
                max_eigen: grid.max_eigen,
            },
            scorer: ScorerConfig::new(method, grid.alpha[c % grid.alpha.len()]),
        },
        cv_score,
        candidates: groups.len() * combos,
        failed_candidates,
        fits: units.len(),
    })
}
