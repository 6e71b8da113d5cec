use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::pairwise_auc;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub fpr: f64,
    /// `None` when only one class is present.
    pub auc: Option<f64>,
    /// No positive predictions; `precision` is reported as 1.
    pub precision_undefined: bool,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl DetectionMetrics {
    /// Threshold metrics from a confusion matrix (`auc` left unset).
    pub fn from_counts(tn: u64, fp: u64, fn_: u64, tp: u64) -> Self {
        let precision_undefined = tp + fp == 0;
        Self {
            tp,
            fp,
            tn,
            fn_,
            precision: if precision_undefined { 1.0 } else { ratio(tp, tp + fp) },
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
            fpr: ratio(fp, fp + tn),
            auc: None,
            precision_undefined,
        }
    }
}

/// Confusion counts at `score > tau` plus the pairwise AUC. `labels` are
/// `true` for the positive (adversarial) class.
pub fn compute_metrics(scores: &[f64], labels: &[bool], tau: f64) -> Result<DetectionMetrics> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::Empty("scores"));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for (&s, &y) in scores.iter().zip(labels) {
        match (y, s > tau) {
            (true, true) => tp += 1,
            (true, false) => fn_ += 1,
            (false, true) => fp += 1,
            (false, false) => tn += 1,
        }
        if y {
            pos.push(s);
        } else {
            neg.push(s);
        }
    }
    let mut m = DetectionMetrics::from_counts(tn, fp, fn_, tp);
    m.auc = pairwise_auc(&neg, &pos);
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn published_counts() {
        let m = DetectionMetrics::from_counts(235, 15, 5, 245);
        assert!((m.precision - 0.9423).abs() < 1e-4);
        assert!((m.recall - 0.98).abs() < 1e-4);
        assert!((m.f1 - 0.9608).abs() < 1e-4);
        assert!((m.fpr - 0.06).abs() < 1e-4);
    }

    #[test]
    fn no_positive_predictions_flagged() {
        let m = compute_metrics(&[0.2, 0.1], &[true, false], 0.5).unwrap();
        assert!(m.precision_undefined);
        assert_eq!(m.precision, 1.0);
        assert_eq!(m.auc, Some(1.0));
    }

    #[test]
    fn single_class_auc_undefined() {
        let m = compute_metrics(&[0.1, 0.9], &[false, false], 0.5).unwrap();
        assert_eq!(m.auc, None);
        assert!(compute_metrics(&[], &[], 0.5).is_err());
    }
}
