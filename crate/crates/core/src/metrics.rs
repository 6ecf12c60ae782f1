//! Threshold calibration, the detection rule, AUROC and FPR at a target TPR.
//!
//! Every function here uses the higher-score-is-ID convention: a sample is
//! accepted as in-distribution iff `score >= threshold`.

use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("non-finite score in {0}")]
    NonFinite(&'static str),
    #[error("target rate must lie in (0, 1), got {0}")]
    InvalidTarget(f64),
}

/// Scores of an in-distribution and an out-of-distribution sample set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoredSplit {
    pub id_scores: Vec<f64>,
    pub ood_scores: Vec<f64>,
}

impl ScoredSplit {
    pub fn new(id_scores: Vec<f64>, ood_scores: Vec<f64>) -> Self {
        Self { id_scores, ood_scores }
    }

    fn validate(&self) -> Result<(), MetricsError> {
        check_scores(&self.id_scores, "id_scores")?;
        check_scores(&self.ood_scores, "ood_scores")
    }
}

fn check_scores(scores: &[f64], name: &'static str) -> Result<(), MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput(name));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricsError::NonFinite(name));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Id,
    Ood,
}

/// Which distribution a sample was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Id,
    Ood,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Id => "id",
            Split::Ood => "ood",
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// ID iff `score >= threshold`.
pub fn detect(score: f64, threshold: f64) -> Decision {
    if score >= threshold {
        Decision::Id
    } else {
        Decision::Ood
    }
}

/// Smallest count `m` out of `n` with `m / n >= target`.
fn required_count(n: usize, target: f64) -> usize {
    let nf = n as f64;
    let mut m = ((target * nf).ceil() as usize).clamp(1, n);
    while m > 1 && (m - 1) as f64 / nf >= target {
        m -= 1;
    }
    while m < n && (m as f64) / nf < target {
        m += 1;
    }
    m
}

fn sorted_descending(scores: &[f64]) -> Vec<f64> {
    let mut sorted = scores.to_vec();
    sorted.sort_unstable_by(|a, b| b.total_cmp(a));
    sorted
}

/// Largest observed score `t` such that the fraction of `id_scores >= t`
/// is at least `tpr_target`.
pub fn calibrate_threshold(id_scores: &[f64], tpr_target: f64) -> Result<f64, MetricsError> {
    check_target(tpr_target)?;
    check_scores(id_scores, "id_scores")?;
    let sorted = sorted_descending(id_scores);
    Ok(sorted[required_count(sorted.len(), tpr_target) - 1])
}

fn check_target(target: f64) -> Result<(), MetricsError> {
    if target > 0.0 && target < 1.0 {
        Ok(())
    } else {
        Err(MetricsError::InvalidTarget(target))
    }
}

/// Operating point of the detector at a target true-positive rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub threshold: f64,
    pub tpr_target: f64,
    /// Observed ID acceptance rate at `threshold` (>= `tpr_target`).
    pub tpr: f64,
    pub fpr: f64,
}

pub fn fpr_at_tpr(split: &ScoredSplit, tpr_target: f64) -> Result<OperatingPoint, MetricsError> {
    split.validate()?;
    let threshold = calibrate_threshold(&split.id_scores, tpr_target)?;
    let rate = |scores: &[f64]| scores.iter().filter(|&&s| s >= threshold).count() as f64 / scores.len() as f64;
    Ok(OperatingPoint { threshold, tpr_target, tpr: rate(&split.id_scores), fpr: rate(&split.ood_scores) })
}

/// Probability that a random ID score exceeds a random OOD score, ties
/// counted one half.
///
/// Computed from mid-ranks of the pooled sample (Mann-Whitney U divided by
/// `n_id * n_ood`), which is exactly the trapezoidal area under the
/// empirical ROC curve.
pub fn auroc(split: &ScoredSplit) -> Result<f64, MetricsError> {
    split.validate()?;
    let n_id = split.id_scores.len();
    let n_ood = split.ood_scores.len();
    let mut pooled: Vec<(f64, bool)> =
        split.id_scores.iter().map(|&s| (s, true)).chain(split.ood_scores.iter().map(|&s| (s, false))).collect();
    pooled.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    // Sum of 1-based mid-ranks of the ID scores.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let mut j = i + 1;
        while j < pooled.len() && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let mid_rank = (i + 1 + j) as f64 / 2.0;
        let id_in_run = pooled[i..j].iter().filter(|p| p.1).count();
        rank_sum += mid_rank * id_in_run as f64;
        i = j;
    }
    let u = rank_sum - (n_id * (n_id + 1)) as f64 / 2.0;
    Ok(u / (n_id as f64 * n_ood as f64))
}

/// One point of the empirical ROC curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Empirical ROC curve from the strictest to the loosest threshold,
/// starting at (0, 0).
pub fn roc_curve(split: &ScoredSplit) -> Result<Vec<RocPoint>, MetricsError> {
    split.validate()?;
    let mut pooled: Vec<(f64, bool)> =
        split.id_scores.iter().map(|&s| (s, true)).chain(split.ood_scores.iter().map(|&s| (s, false))).collect();
    pooled.sort_unstable_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => b.1.cmp(&a.1),
        o => o,
    });
    let n_id = split.id_scores.len() as f64;
    let n_ood = split.ood_scores.len() as f64;
    let mut curve = vec![RocPoint { threshold: f64::INFINITY, fpr: 0.0, tpr: 0.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < pooled.len() {
        let value = pooled[i].0;
        while i < pooled.len() && pooled[i].0 == value {
            if pooled[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        curve.push(RocPoint { threshold: value, fpr: fp as f64 / n_ood, tpr: tp as f64 / n_id });
    }
    Ok(curve)
}

/// AUROC by trapezoidal integration of [`roc_curve`].
pub fn auroc_trapezoid(split: &ScoredSplit) -> Result<f64, MetricsError> {
    let curve = roc_curve(split)?;
    Ok(curve.windows(2).map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub auroc: f64,
    pub fpr_at_tpr: f64,
    pub threshold: f64,
    pub tpr_target: f64,
}

pub const DEFAULT_TPR: f64 = 0.95;

pub fn evaluate(split: &ScoredSplit, tpr_target: f64) -> Result<EvalResult, MetricsError> {
    let op = fpr_at_tpr(split, tpr_target)?;
    Ok(EvalResult { auroc: auroc(split)?, fpr_at_tpr: op.fpr, threshold: op.threshold, tpr_target })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn split(id: &[f64], ood: &[f64]) -> ScoredSplit {
        ScoredSplit::new(id.to_vec(), ood.to_vec())
    }

    /// Exhaustive sweep over every observed value: the largest `t` whose
    /// acceptance fraction reaches the target.
    fn sweep_threshold(scores: &[f64], target: f64) -> f64 {
        let n = scores.len() as f64;
        scores
            .iter()
            .copied()
            .filter(|&t| scores.iter().filter(|&&s| s >= t).count() as f64 / n >= target)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    #[test]
    fn threshold_twenty_values() {
        let scores: Vec<f64> = (1..=20).map(|i| i as f64 * 0.05).collect();
        let t = calibrate_threshold(&scores, 0.95).unwrap();
        assert_eq!(t, sweep_threshold(&scores, 0.95));
        assert_eq!(t, scores[1]);
        assert!((t - 0.10).abs() < 1e-15);
    }

    #[test]
    fn threshold_constant_scores() {
        for target in [0.1, 0.5, 0.95, 0.999] {
            assert_eq!(calibrate_threshold(&[0.3; 7], target).unwrap(), 0.3);
        }
    }

    #[test]
    fn threshold_median() {
        let scores = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(calibrate_threshold(&scores, 0.5).unwrap(), 3.0);
        assert_eq!(sweep_threshold(&scores, 0.5), 3.0);
    }

    #[test]
    fn threshold_errors() {
        assert_eq!(calibrate_threshold(&[], 0.95), Err(MetricsError::EmptyInput("id_scores")));
        assert!(matches!(calibrate_threshold(&[1.0], 1.0), Err(MetricsError::InvalidTarget(_))));
        assert!(matches!(calibrate_threshold(&[1.0], 0.0), Err(MetricsError::InvalidTarget(_))));
    }

    #[test]
    fn fpr_perfect_separation() {
        let op = fpr_at_tpr(&split(&[1.0; 10], &[0.0; 10]), 0.95).unwrap();
        assert_eq!(op.fpr, 0.0);
        assert_eq!(op.threshold, 1.0);
    }

    #[test]
    fn fpr_dominated_ood_is_one() {
        let op = fpr_at_tpr(&split(&[0.1, 0.2, 0.3], &[0.5, 0.9]), 0.95).unwrap();
        assert_eq!(op.fpr, 1.0);
    }

    #[test]
    fn auroc_examples() {
        assert_eq!(auroc(&split(&[0.9, 0.8], &[0.7, 0.6])).unwrap(), 1.0);
        assert_eq!(auroc(&split(&[0.9, 0.6], &[0.7, 0.5])).unwrap(), 0.75);
        assert_eq!(auroc(&split(&[0.5], &[0.5])).unwrap(), 0.5);
        assert_eq!(auroc(&split(&[0.1], &[0.9])).unwrap(), 0.0);
    }

    #[test]
    fn auroc_trapezoid_handles_ties() {
        let s = split(&[0.5, 0.5, 0.7], &[0.5, 0.2]);
        assert!((auroc(&s).unwrap() - auroc_trapezoid(&s).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn detection_rule_is_inclusive() {
        assert_eq!(detect(0.9, 0.5), Decision::Id);
        assert_eq!(detect(0.5, 0.5), Decision::Id);
        assert_eq!(detect(0.49, 0.5), Decision::Ood);
    }

    #[test]
    fn empty_and_non_finite_inputs() {
        assert_eq!(auroc(&split(&[], &[1.0])), Err(MetricsError::EmptyInput("id_scores")));
        assert_eq!(auroc(&split(&[1.0], &[])), Err(MetricsError::EmptyInput("ood_scores")));
        assert_eq!(fpr_at_tpr(&split(&[f64::NAN], &[1.0]), 0.95), Err(MetricsError::NonFinite("id_scores")));
    }

    #[test]
    fn roc_curve_endpoints() {
        let curve = roc_curve(&split(&[0.9, 0.4], &[0.6, 0.1])).unwrap();
        let last = curve.last().unwrap();
        assert_eq!((curve[0].fpr, curve[0].tpr), (0.0, 0.0));
        assert_eq!((last.fpr, last.tpr), (1.0, 1.0));
    }
}
