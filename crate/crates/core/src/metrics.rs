//! Binary classification metrics from labels, hard predictions and scores.
//!
//! Class 1 is the positive class. Hard predictions come from posteriors by
//! [`hard_labels`] (posterior above 0.5).

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("labels contain a single class")]
    SingleClass,
    #[error("length mismatch: {0} labels, {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("no samples")]
    Empty,
}

pub const METRIC_NAMES: [&str; 8] = [
    "auc",
    "f1_weighted",
    "bcr",
    "sensitivity",
    "specificity",
    "precision",
    "recall",
    "accuracy",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub auc: f64,
    pub f1_weighted: f64,
    pub bcr: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

impl MetricSet {
    /// Values in the order of [`METRIC_NAMES`].
    pub fn values(&self) -> [f64; 8] {
        [
            self.auc,
            self.f1_weighted,
            self.bcr,
            self.sensitivity,
            self.specificity,
            self.precision,
            self.recall,
            self.accuracy,
        ]
    }
}

pub fn hard_labels(scores: &[f64]) -> Vec<u8> {
    scores.iter().map(|&p| u8::from(p > 0.5)).collect()
}

fn check(labels: &[u8], other: usize) -> Result<(), MetricsError> {
    if labels.len() != other {
        return Err(MetricsError::LengthMismatch(labels.len(), other));
    }
    if labels.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn new(labels: &[u8], pred: &[u8]) -> Self {
        let mut c = Self {
            tp: 0,
            fp: 0,
            tn: 0,
            fn_: 0,
        };
        for (&l, &p) in labels.iter().zip(pred) {
            match (l, p) {
                (1, 1) => c.tp += 1,
                (0, 1) => c.fp += 1,
                (0, _) => c.tn += 1,
                _ => c.fn_ += 1,
            }
        }
        c
    }
}

fn ratio(a: usize, b: usize, degenerate: &mut bool) -> f64 {
    if b == 0 {
        *degenerate = true;
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Sample-weighted mean of the per-class F1 scores. A class whose precision
/// and recall are both zero contributes zero.
pub fn f1_weighted(labels: &[u8], pred: &[u8]) -> Result<f64, MetricsError> {
    check(labels, pred.len())?;
    let n = labels.len() as f64;
    let mut total = 0.0;
    for c in 0..2u8 {
        let tp = labels.iter().zip(pred).filter(|(&l, &p)| l == c && p == c).count() as f64;
        let support = labels.iter().filter(|&&l| l == c).count() as f64;
        let predicted = pred.iter().filter(|&&p| p == c).count() as f64;
        let prec = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let rec = if support > 0.0 { tp / support } else { 0.0 };
        if prec + rec > 0.0 {
            total += support / n * 2.0 * prec * rec / (prec + rec);
        }
    }
    Ok(total)
}

/// Probability that a random positive scores above a random negative, ties
/// counting one half.
pub fn auc(labels: &[u8], scores: &[f64]) -> Result<f64, MetricsError> {
    check(labels, scores.len())?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(MetricsError::SingleClass);
    }
    let ranks = crate::preprocess::midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos * neg) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub bcr: f64,
    /// Some ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
}

pub fn threshold_metrics(labels: &[u8], pred: &[u8]) -> Result<ThresholdMetrics, MetricsError> {
    check(labels, pred.len())?;
    let c = Confusion::new(labels, pred);
    let mut degenerate = false;
    let sensitivity = ratio(c.tp, c.tp + c.fn_, &mut degenerate);
    let specificity = ratio(c.tn, c.tn + c.fp, &mut degenerate);
    let precision = ratio(c.tp, c.tp + c.fp, &mut degenerate);
    let accuracy = (c.tp + c.tn) as f64 / labels.len() as f64;
    Ok(ThresholdMetrics {
        sensitivity,
        specificity,
        precision,
        recall: sensitivity,
        accuracy,
        bcr: (sensitivity + specificity) / 2.0,
        degenerate,
    })
}

/// All metrics for posterior scores; needs both classes in `labels`.
pub fn metric_set(labels: &[u8], scores: &[f64]) -> Result<MetricSet, MetricsError> {
    let auc = auc(labels, scores)?;
    let pred = hard_labels(scores);
    let t = threshold_metrics(labels, &pred)?;
    Ok(MetricSet {
        auc,
        f1_weighted: f1_weighted(labels, &pred)?,
        bcr: t.bcr,
        sensitivity: t.sensitivity,
        specificity: t.specificity,
        precision: t.precision,
        recall: t.recall,
        accuracy: t.accuracy,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
    /// Scores at or above this value are called positive.
    pub threshold: f64,
}

/// ROC curve from (0, 0) to (1, 1) with one point per distinct score.
pub fn roc_curve(labels: &[u8], scores: &[f64]) -> Result<Vec<RocPoint>, MetricsError> {
    check(labels, scores.len())?;
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return Err(MetricsError::SingleClass);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        fpr: 0.0,
        tpr: 0.0,
        threshold: f64::INFINITY,
    }];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let s = scores[idx[i]];
        while i < idx.len() && scores[idx[i]] == s {
            if labels[idx[i]] == 1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp / neg,
            tpr: tp / pos,
            threshold: s,
        });
    }
    Ok(points)
}

/// Trapezoidal area under a curve.
pub fn trapezoid_area(curve: &[RocPoint]) -> f64 {
    curve
        .windows(2)
        .map(|w| (w[1].fpr - w[0].fpr) * (w[1].tpr + w[0].tpr) / 2.0)
        .sum()
}
