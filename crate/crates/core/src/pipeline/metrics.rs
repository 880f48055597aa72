// SPDX-License-Identifier: MIT OR Apache-2.0

//! Ranking metrics. Higher anomaly score means more anomalous; `+∞` ranks
//! above every finite score and infinities tie among themselves.

use std::cmp::Ordering;

use crate::error::{Error, Result};

fn check(scores: &[f64], is_outlier: &[bool]) -> Result<()> {
    if scores.len() != is_outlier.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: is_outlier.len(),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParameter("scores contain NaN".into()));
    }
    let outliers = is_outlier.iter().filter(|&&o| o).count();
    if outliers == 0 || outliers == is_outlier.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

fn order(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    idx
}

fn same(a: f64, b: f64) -> bool {
    a.total_cmp(&b) == Ordering::Equal
}

/// 1-based ranks in increasing score order, tied scores sharing their mean rank.
pub fn midranks(scores: &[f64]) -> Vec<f64> {
    let idx = order(scores);
    let mut ranks = vec![0.0; scores.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && same(scores[idx[j]], scores[idx[i]]) {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    ranks
}

/// Probability that a random outlier scores above a random normal, ties
/// counting one half.
pub fn roc_auc(scores: &[f64], is_outlier: &[bool]) -> Result<f64> {
    check(scores, is_outlier)?;
    let ranks = midranks(scores);
    let n1 = is_outlier.iter().filter(|&&o| o).count() as f64;
    let n0 = scores.len() as f64 - n1;
    let rank_sum: f64 = ranks.iter().zip(is_outlier).filter(|(_, &o)| o).map(|(r, _)| r).sum();
    Ok((rank_sum - n1 * (n1 + 1.0) / 2.0) / (n1 * n0))
}

/// Average precision with normals as the positive class, retrieved in
/// increasing order of anomaly score. A group of tied scores is retrieved
/// at once and contributes its recall gain at the precision reached after
/// the whole group.
pub fn pr_auc(scores: &[f64], is_outlier: &[bool]) -> Result<f64> {
    check(scores, is_outlier)?;
    let idx = order(scores);
    let positives = is_outlier.iter().filter(|&&o| !o).count() as f64;
    let mut seen = 0usize;
    let mut hits = 0usize;
    let mut ap = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        let mut group_hits = 0usize;
        while j < idx.len() && same(scores[idx[j]], scores[idx[i]]) {
            if !is_outlier[idx[j]] {
                group_hits += 1;
            }
            j += 1;
        }
        seen += j - i;
        hits += group_hits;
        if group_hits > 0 {
            ap += (group_hits as f64 / positives) * (hits as f64 / seen as f64);
        }
        i = j;
    }
    Ok(ap)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roc_examples() {
        let o = [false, true, false, true];
        assert_eq!(roc_auc(&[0.8, 0.9, 0.1, 0.7], &o).unwrap(), 0.75);
        assert_eq!(roc_auc(&[0.0, 1.0, 0.1, 2.0], &o).unwrap(), 1.0);
        assert_eq!(roc_auc(&[1.0; 4], &o).unwrap(), 0.5);
    }

    #[test]
    fn pr_examples() {
        let o = [true, true, true, false];
        assert_eq!(pr_auc(&[1.0, 2.0, 3.0, 0.0], &o).unwrap(), 1.0);
        assert_eq!(pr_auc(&[1.0, 2.0, 3.0, 4.0], &o).unwrap(), 0.25);
        let o = [true, false, true, false];
        assert_eq!(pr_auc(&[3.0; 4], &o).unwrap(), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert_eq!(roc_auc(&[1.0, 2.0], &[true, true]), Err(Error::SingleClass));
        assert_eq!(pr_auc(&[1.0, 2.0], &[false, false]), Err(Error::SingleClass));
    }

    #[test]
    fn infinities_rank_on_top_and_tie() {
        let inf = f64::INFINITY;
        assert_eq!(midranks(&[inf, 1.0, inf, -3.0]), vec![3.5, 2.0, 3.5, 1.0]);
        assert_eq!(roc_auc(&[inf, 1e300, 0.0], &[true, false, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[inf, inf, 0.0], &[true, false, false]).unwrap(), 0.75);
    }
}
