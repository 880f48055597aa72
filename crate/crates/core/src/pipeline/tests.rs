// SPDX-License-Identifier: MIT OR Apache-2.0

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::kernel::KernelFamily;
use crate::static_kernels::{dot, StaticKernel};

fn series(rows: &[&[f64]]) -> TimeSeries {
    TimeSeries::from_rows(rows).unwrap()
}

#[test]
fn identity_stats_only_prepend_basepoint() {
    // Stats source with mean 0 and std 1 in both dimensions.
    let stats = vec![series(&[&[1.0, -1.0], &[-1.0, 1.0]])];
    let x = series(&[&[0.3, -0.2], &[1.5, 0.0], &[-2.0, 4.0]]);
    let y = preprocess(&PreprocConfig::default(), &stats, &x).unwrap();
    assert_eq!(y.len(), 4);
    assert_eq!(y.row(0), &[0.0, 0.0]);
    for t in 0..3 {
        assert_eq!(y.row(t + 1), x.row(t));
    }
}

#[test]
fn pooling_halves_long_series() {
    let x = TimeSeries::univariate(&(0..200).map(|v| v as f64).collect::<Vec<_>>()).unwrap();
    let pre = Preprocessor {
        config: PreprocConfig {
            clip: 1e9,
            ..PreprocConfig::default()
        },
        mean: vec![0.0],
        std: vec![1.0],
    };
    let y = pre.apply(&x).unwrap();
    assert_eq!(y.len(), 101);
    assert_eq!(y.row(1), &[0.5]);
    assert_eq!(y.row(100), &[198.5]);
    // Uneven split: 7 steps into windows of 2 leaves a short final window.
    let cfg = PreprocConfig {
        max_len: 4,
        add_basepoint: false,
        clip: 1e9,
        ..PreprocConfig::default()
    };
    let pre = Preprocessor { config: cfg, ..pre };
    let y = pre.apply(&TimeSeries::univariate(&[1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0]).unwrap()).unwrap();
    assert_eq!(y.flat(), &[2.0, 6.0, 10.0, 13.0]);
}

#[test]
fn constant_dimension_uses_floored_std() {
    let stats = vec![series(&[&[2.0], &[2.0]]), series(&[&[2.0]])];
    let pre = Preprocessor::fit(PreprocConfig::default(), &stats).unwrap();
    assert_eq!(pre.std, vec![STD_FLOOR]);
    let y = pre.apply(&series(&[&[2.0], &[3.0]])).unwrap();
    assert!(y.flat().iter().all(|v| v.is_finite()));
    assert_eq!(y.row(2), &[5.0]);
}

#[test]
fn time_channel_skips_normalization_and_clipping() {
    let stats = vec![series(&[&[0.0], &[10.0]])];
    let cfg = PreprocConfig {
        add_time: true,
        clip: 0.5,
        ..PreprocConfig::default()
    };
    let y = preprocess(&cfg, &stats, &series(&[&[100.0], &[-100.0], &[5.0]])).unwrap();
    assert_eq!(y.dim(), 2);
    assert_eq!(y.len(), 4);
    let time: Vec<f64> = y.rows().map(|r| r[1]).collect();
    assert_eq!(time, vec![0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
    assert_eq!(y.row(1)[0], 0.5);
    assert_eq!(y.row(2)[0], -0.5);
}

#[test]
fn preprocess_errors() {
    let x = series(&[&[1.0]]);
    assert_eq!(preprocess(&PreprocConfig::default(), &[], &x), Err(Error::EmptyStats));
    let bad = PreprocConfig {
        max_len: 1,
        ..PreprocConfig::default()
    };
    assert!(preprocess(&bad, std::slice::from_ref(&x), &x).is_err());
    let two = series(&[&[1.0, 2.0]]);
    assert!(preprocess(&PreprocConfig::default(), &[x], &two).is_err());
}

#[test]
fn vrk_clip_examples() {
    let x = TimeSeries::univariate(&[5.0, -0.1]).unwrap();
    let c = vrk_clip(1.0, &x);
    assert!((c.row(0)[0] - 0.99f64.sqrt()).abs() < 1e-15);
    assert_eq!(c.row(1)[0], -0.1);
    assert_eq!(vrk_clip(1e-3, &x), x);
}

proptest! {
    #[test]
    fn vrk_clip_guarantees_margin(
        tau in 0.05f64..3.0,
        d in 1usize..5,
        vals in prop::collection::vec(-10.0f64..10.0, 40),
    ) {
        let x = TimeSeries::new(4, d, vals[..4 * d].to_vec()).unwrap();
        let y = TimeSeries::new(4, d, vals[20..20 + 4 * d].to_vec()).unwrap();
        let (cx, cy) = (vrk_clip(tau, &x), vrk_clip(tau, &y));
        for t in 0..4 {
            prop_assert!(1.0 - tau * tau * dot(cx.row(t), cy.row(t)) >= 0.01 - 1e-12);
        }
    }

    #[test]
    fn roc_invariant_under_increasing_maps(
        scores in prop::collection::vec(-5.0f64..5.0, 2..30),
        seed in any::<u64>(),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut labels: Vec<bool> = scores.iter().map(|_| rng.random()).collect();
        labels[0] = true;
        labels[1] = false;
        let mapped: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
        let a = roc_auc(&scores, &labels).unwrap();
        prop_assert!((a - roc_auc(&mapped, &labels).unwrap()).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&a));
        let mut rs = scores.clone();
        let mut rl = labels.clone();
        rs.reverse();
        rl.reverse();
        prop_assert_eq!(a, roc_auc(&rs, &rl).unwrap());
        let p = pr_auc(&scores, &labels).unwrap();
        prop_assert_eq!(p, pr_auc(&rs, &rl).unwrap());
        prop_assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn preprocess_idempotent_on_normalized_short_series(
        vals in prop::collection::vec(-4.0f64..4.0, 2..20),
    ) {
        let x = TimeSeries::univariate(&vals).unwrap();
        let pre = Preprocessor { config: PreprocConfig::default(), mean: vec![0.0], std: vec![1.0] };
        let y = pre.apply(&x).unwrap();
        prop_assert_eq!(&y.flat()[1..], x.flat());
    }
}

/// Two classes of noisy sinusoids at different frequencies.
fn sinusoids(per_class: usize, seed: u64) -> LabeledSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut series = Vec::new();
    let mut labels = Vec::new();
    for (label, freq) in [("a", 1.0), ("b", 2.5)] {
        for _ in 0..per_class {
            let phase: f64 = rng.random_range(-0.2..0.2);
            let vals: Vec<f64> = (0..20)
                .map(|t| {
                    let s = t as f64 / 19.0;
                    (std::f64::consts::TAU * freq * s + phase).sin() + rng.random_range(-0.1..0.1)
                })
                .collect();
            series.push(TimeSeries::univariate(&vals).unwrap());
            labels.push(label.to_string());
        }
    }
    LabeledSet::new(series, labels).unwrap()
}

fn small_grid() -> GridSpec {
    GridSpec {
        folds: 3,
        repeats: 2,
        add_time: vec![false],
        threshold: vec![1e-10],
        alpha: vec![1e-5, 1e-2],
        ..GridSpec::default()
    }
}

#[test]
fn family_names_round_trip() {
    for f in FamilyChoice::all() {
        assert_eq!(f.to_string().parse::<FamilyChoice>().unwrap(), f);
    }
    assert!("flattened_cosine".parse::<FamilyChoice>().is_err());
}

#[test]
fn default_grid_values() {
    let g = GridSpec::default();
    assert_eq!(g.kernels.vrk_lambda.len(), 10);
    assert!((g.kernels.vrk_lambda[0] - 0.25).abs() < 1e-12);
    assert!((g.kernels.vrk_lambda[9] - 0.999).abs() < 1e-12);
    assert_eq!(g.kernels.rand_variance.len(), 8);
    assert!((g.kernels.rand_variance[7] - 1.0).abs() < 1e-12);
    let specs = expand_kernels(FamilyChoice::Flattened(BaseChoice::Rbf), &g, 4, 10, &[]).unwrap();
    match specs[2].kernel {
        KernelFamily::Flattened {
            base: StaticKernel::Rbf { sigma },
        } => assert_eq!(sigma, 0.5),
        ref other => panic!("{other:?}"),
    }
    let n = expand_kernels(FamilyChoice::TruncatedSignature(BaseChoice::Linear), &g, 1, 10, &[]).unwrap();
    assert_eq!(n.len(), 35);
    let n = expand_kernels(FamilyChoice::RandomizedSignature, &g, 1, 10, &[]).unwrap();
    assert_eq!(n.len(), 5 * 8 * 5);
}

#[test]
fn single_point_grid_returns_it() {
    let data = sinusoids(8, 1);
    let grid = GridSpec {
        alpha: vec![1e-2],
        kernels: KernelGrid {
            rbf_sigma: vec![1.0],
            ..KernelGrid::default()
        },
        ..small_grid()
    };
    let r = grid_search(&data, "a", &grid, ScoreMethod::Conformance, FamilyChoice::Flattened(BaseChoice::Rbf)).unwrap();
    assert_eq!(r.candidates, 1);
    assert_eq!(r.best.scorer.alpha, 1e-2);
    assert!(r.cv_score > 0.0 && r.cv_score <= 2.0);
}

#[test]
fn separating_bandwidth_is_selected() {
    let data = sinusoids(10, 2);
    // A vanishing bandwidth makes every held-out point equally far from the
    // corpus, so only the moderate bandwidth can separate the classes.
    let grid = GridSpec {
        kernels: KernelGrid {
            rbf_sigma: vec![1e-6, 2.0],
            ..KernelGrid::default()
        },
        ..small_grid()
    };
    let r = grid_search(&data, "a", &grid, ScoreMethod::Conformance, FamilyChoice::Flattened(BaseChoice::Rbf)).unwrap();
    match r.best.kernel.kernel {
        KernelFamily::Flattened {
            base: StaticKernel::Rbf { sigma },
        } => assert_eq!(sigma, 2.0),
        ref other => panic!("{other:?}"),
    }
    assert!(r.cv_score > 1.9);
}

#[test]
fn search_is_deterministic() {
    let data = sinusoids(8, 3);
    let grid = small_grid();
    let f = FamilyChoice::Integral(BaseChoice::Rbf);
    let a = grid_search(&data, "b", &grid, ScoreMethod::Mahalanobis, f).unwrap();
    let b = grid_search(&data, "b", &grid, ScoreMethod::Mahalanobis, f).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.cv_score.to_bits(), b.cv_score.to_bits());
}

#[test]
fn search_preconditions() {
    let data = sinusoids(2, 4);
    let grid = small_grid();
    let f = FamilyChoice::Flattened(BaseChoice::Linear);
    assert!(matches!(
        grid_search(&data, "a", &grid, ScoreMethod::Conformance, f),
        Err(Error::InsufficientNormals { .. })
    ));
    let only_a = LabeledSet::new(data.members("a"), vec!["a".into(); 2]).unwrap();
    let grid2 = GridSpec { folds: 2, ..grid };
    assert_eq!(
        grid_search(&only_a, "a", &grid2, ScoreMethod::Conformance, f),
        Err(Error::SingleClass)
    );
}

#[test]
fn one_vs_rest_on_separable_classes() {
    let train = sinusoids(10, 5);
    let test = sinusoids(10, 6);
    let report = run_one_vs_rest(&train, &test, &small_grid(), ScoreMethod::Conformance, FamilyChoice::Flattened(BaseChoice::Linear)).unwrap();
    assert_eq!(report.per_class.len(), 2);
    assert!(!report.is_partial());
    let mut rocs = Vec::new();
    for c in &report.per_class {
        match &c.outcome {
            ClassOutcome::Ok { roc_auc, pr_auc, .. } => {
                assert!((0.0..=1.0).contains(roc_auc) && (0.0..=1.0).contains(pr_auc));
                rocs.push(*roc_auc);
            }
            ClassOutcome::Failed { error } => panic!("{error}"),
        }
    }
    let mean = report.mean_roc_auc.unwrap();
    assert_eq!(mean, (rocs[0] + rocs[1]) / 2.0);
    assert!(mean >= 0.95, "{mean}");
    assert!(report.to_text().contains("mean"));
}

#[test]
fn test_without_outliers_is_partial() {
    let train = sinusoids(8, 7);
    let test = LabeledSet::new(train.members("a"), vec!["a".into(); 8]).unwrap();
    let report = run_one_vs_rest(&train, &test, &small_grid(), ScoreMethod::Mahalanobis, FamilyChoice::Flattened(BaseChoice::Linear)).unwrap();
    assert!(report.is_partial());
    assert!(report.per_class.iter().all(|c| matches!(c.outcome, ClassOutcome::Failed { .. })));
    assert_eq!(report.mean_roc_auc, None);
}

#[test]
fn report_is_reproducible() {
    let train = sinusoids(6, 8);
    let test = sinusoids(6, 9);
    let run = || {
        run_one_vs_rest(&train, &test, &small_grid(), ScoreMethod::Conformance, FamilyChoice::Gak)
            .unwrap()
            .to_json()
    };
    assert_eq!(run(), run());
}
