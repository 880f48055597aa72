// SPDX-License-Identifier: MIT OR Apache-2.0

//! Semi-supervised novelty detection experiments: preprocessing, metrics,
//! grid search and the one-vs-rest protocol.

mod grid;
mod metrics;
mod preprocess;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use grid::{
    expand_kernels, grid_search, BaseChoice, Candidate, FamilyChoice, GridSpec, KernelGrid, SearchResult,
};
pub use metrics::{midranks, pr_auc, roc_auc};
pub use preprocess::{preprocess, vrk_clip, vrk_clip_bound, PreprocConfig, Preprocessor, STD_FLOOR};

use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::variance_model::{ScoreMethod, VarianceModel};

/// Series with one class label each.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSet {
    pub series: Vec<TimeSeries>,
    pub labels: Vec<String>,
}

impl LabeledSet {
    pub fn new(series: Vec<TimeSeries>, labels: Vec<String>) -> Result<Self> {
        if series.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: series.len(),
                found: labels.len(),
            });
        }
        Ok(Self { series, labels })
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<String> {
        self.labels.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn indices_of(&self, class: &str) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.labels[i] == class).collect()
    }

    pub fn members(&self, class: &str) -> Vec<TimeSeries> {
        self.indices_of(class).into_iter().map(|i| self.series[i].clone()).collect()
    }
}

/// A fitted candidate: the preprocessor built from the normal corpus and the
/// model fitted on its preprocessed members.
pub fn fit_candidate(normals: &[TimeSeries], candidate: &Candidate) -> Result<(Preprocessor, VarianceModel)> {
    let pre = Preprocessor::fit(candidate.preprocessing, normals)?;
    let corpus = pre.apply_all(normals)?;
    let model = VarianceModel::fit(corpus, candidate.kernel.clone(), candidate.fit)?;
    Ok((pre, model))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ClassOutcome {
    Ok {
        roc_auc: f64,
        pr_auc: f64,
        cv_score: f64,
        chosen: Candidate,
    },
    Failed {
        error: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    pub outcome: ClassOutcome,
}

/// Work counters. Deliberately free of wall-clock time so reports are
/// reproducible.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub classes: usize,
    pub failed_classes: usize,
    pub candidates: usize,
    pub failed_candidates: usize,
    pub fits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: ScoreMethod,
    pub family: FamilyChoice,
    pub per_class: Vec<ClassReport>,
    /// Means over the classes that succeeded; `None` if none did.
    pub mean_roc_auc: Option<f64>,
    pub mean_pr_auc: Option<f64>,
    pub stats: RunStats,
}

impl EvalReport {
    pub fn is_partial(&self) -> bool {
        self.stats.failed_classes > 0
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    /// Plain-text table with one row per class and a row of averages.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "method: {}", self.method);
        let _ = writeln!(s, "family: {}", self.family);
        let _ = writeln!(s, "{:<16} {:>9} {:>9} {:>9}  chosen", "class", "roc_auc", "pr_auc", "cv_score");
        for c in &self.per_class {
            match &c.outcome {
                ClassOutcome::Ok {
                    roc_auc,
                    pr_auc,
                    cv_score,
                    chosen,
                } => {
                    let chosen = serde_json::to_string(chosen).expect("serializable");
                    let _ = writeln!(s, "{:<16} {roc_auc:>9.6} {pr_auc:>9.6} {cv_score:>9.6}  {chosen}", c.class);
                }
                ClassOutcome::Failed { error } => {
                    let _ = writeln!(s, "{:<16} {:>9} {:>9} {:>9}  error: {error}", c.class, "-", "-", "-");
                }
            }
        }
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(s, "{:<16} {:>9} {:>9}", "mean", fmt(self.mean_roc_auc), fmt(self.mean_pr_auc));
        let st = &self.stats;
        let _ = writeln!(
            s,
            "stats: classes={} failed_classes={} candidates={} failed_candidates={} fits={}",
            st.classes, st.failed_classes, st.candidates, st.failed_candidates, st.fits
        );
        s
    }
}

fn evaluate_class(
    train: &LabeledSet,
    test: &LabeledSet,
    class: &str,
    grid: &GridSpec,
    method: ScoreMethod,
    family: FamilyChoice,
    stats: &mut RunStats,
) -> Result<ClassOutcome> {
    let search = grid_search(train, class, grid, method, family)?;
    stats.candidates += search.candidates;
    stats.failed_candidates += search.failed_candidates;
    stats.fits += search.fits + 1;
    let (pre, model) = fit_candidate(&train.members(class), &search.best)?;
    let prepared = pre.apply_all(&test.series)?;
    let scores = model.score_many(&search.best.scorer, &prepared)?;
    let outlier: Vec<bool> = test.labels.iter().map(|l| l != class).collect();
    Ok(ClassOutcome::Ok {
        roc_auc: roc_auc(&scores, &outlier)?,
        pr_auc: pr_auc(&scores, &outlier)?,
        cv_score: search.cv_score,
        chosen: search.best,
    })
}

/// Each training class in turn is the normal corpus; everything else in the
/// test set is an outlier. Per-class failures are recorded, not raised.
pub fn run_one_vs_rest(
    train: &LabeledSet,
    test: &LabeledSet,
    grid: &GridSpec,
    method: ScoreMethod,
    family: FamilyChoice,
) -> Result<EvalReport> {
    grid.validate()?;
    let mut stats = RunStats::default();
    let mut per_class = Vec::new();
    for class in train.classes() {
        let outcome = evaluate_class(train, test, &class, grid, method, family, &mut stats)
            .unwrap_or_else(|e| ClassOutcome::Failed { error: e.to_string() });
        per_class.push(ClassReport { class, outcome });
    }
    let ok: Vec<(f64, f64)> = per_class
        .iter()
        .filter_map(|c| match c.outcome {
            ClassOutcome::Ok { roc_auc, pr_auc, .. } => Some((roc_auc, pr_auc)),
            ClassOutcome::Failed { .. } => None,
        })
        .collect();
    stats.classes = per_class.len();
    stats.failed_classes = per_class.len() - ok.len();
    let mean = |f: fn(&(f64, f64)) -> f64| {
        (!ok.is_empty()).then(|| ok.iter().map(f).sum::<f64>() / ok.len() as f64)
    };
    Ok(EvalReport {
        method,
        family,
        mean_roc_auc: mean(|p| p.0),
        mean_pr_auc: mean(|p| p.1),
        per_class,
        stats,
    })
}

#[cfg(test)]
mod tests;
