use serde::Serialize;

use super::DetectorError;
use crate::data::Label;

/// Binary detection metrics with attacks as the positive class. Rates are
/// percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub recall: f64,
    pub precision: f64,
    pub f1: f64,
    pub accuracy: f64,
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Metrics {
    pub fn from_counts(tp: usize, fp: usize, tn: usize, fn_: usize) -> Self {
        let pct = |num: usize, den: usize| if den == 0 { 0.0 } else { 100.0 * num as f64 / den as f64 };
        let recall = pct(tp, tp + fn_);
        let precision = pct(tp, tp + fp);
        let f1 = if recall + precision == 0.0 {
            0.0
        } else {
            2.0 * recall * precision / (recall + precision)
        };
        Metrics {
            recall,
            precision,
            f1,
            accuracy: pct(tp + tn, tp + fp + tn + fn_),
            tp,
            fp,
            tn,
            fn_,
        }
    }
}

/// Precision is reported as 0 when nothing is flagged.
pub fn evaluate(predictions: &[Label], labels: &[Label]) -> Result<Metrics, DetectorError> {
    if predictions.len() != labels.len() {
        return Err(DetectorError::LengthMismatch {
            predictions: predictions.len(),
            labels: labels.len(),
        });
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, y) in predictions.iter().zip(labels) {
        match (p.is_attack(), y.is_attack()) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    if tp + fn_ == 0 {
        return Err(DetectorError::NoPositives);
    }
    Ok(Metrics::from_counts(tp, fp, tn, fn_))
}
