use rayon::prelude::*;

use super::{check_dim, Detector, DetectorError};
use crate::data::Label;
use crate::pca::{project_reconstruct, PcaModel};

/// Squared reconstruction error of `z` on every component of `model`.
pub fn recon_score(z: &[f64], model: &PcaModel) -> Result<f64, DetectorError> {
    check_dim(model, z)?;
    Ok(project_reconstruct(z, model, model.len())?.sse)
}

/// Threshold maximizing F1 when flagging `score > t`, searched over the
/// distinct scores. Ties go to the larger threshold.
pub fn tune_threshold(scores: &[f64], labels: &[Label]) -> Result<f64, DetectorError> {
    if scores.is_empty() {
        return Err(DetectorError::EmptyScores);
    }
    if scores.len() != labels.len() {
        return Err(DetectorError::LengthMismatch {
            predictions: scores.len(),
            labels: labels.len(),
        });
    }
    let positives = labels.iter().filter(|l| l.is_attack()).count();
    if positives == 0 {
        return Err(DetectorError::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = (f64::NEG_INFINITY, scores[order[0]]);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        // everything strictly above t is flagged at this point
        let f1 = if tp == 0 {
            0.0
        } else {
            2.0 * tp as f64 / (2 * tp + fp + (positives - tp)) as f64
        };
        if f1 > best.0 {
            best = (f1, t);
        }
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]].is_attack() {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
    }
    Ok(best.1)
}

/// Reconstruction-loss detector on the top components of `model`.
#[derive(Debug, Clone)]
pub struct ReconModel {
    pub model: PcaModel,
    pub threshold: Option<f64>,
}

impl ReconModel {
    pub fn new(model: PcaModel) -> Result<Self, DetectorError> {
        if model.is_empty() {
            return Err(DetectorError::EmptyModel);
        }
        Ok(ReconModel { model, threshold: None })
    }

    pub fn with_threshold(mut self, t: f64) -> Self {
        self.threshold = Some(t);
        self
    }

    pub fn score(&self, z: &[f64]) -> Result<f64, DetectorError> {
        recon_score(z, &self.model)
    }

    pub fn batch_scores(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, DetectorError> {
        rows.par_iter().map(|z| self.score(z)).collect()
    }

    pub fn decide(&self, score: f64) -> Result<bool, DetectorError> {
        Ok(score > self.threshold.ok_or(DetectorError::Uncalibrated)?)
    }
}

impl Detector for ReconModel {
    fn is_attack(&self, z: &[f64]) -> Result<bool, DetectorError> {
        self.decide(self.score(z)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pca::model_from_eigenvalues;
    use Label::{Attack as A, Normal as N};

    #[test]
    fn in_span_scores_zero() {
        let m = model_from_eigenvalues(&[3.0, 2.0, 1.0]).top(2);
        assert_eq!(recon_score(&[1.0, -2.0, 0.0], &m).unwrap(), 0.0);
        assert_eq!(recon_score(&[1.0, 0.0, 0.5], &m).unwrap(), 0.25);
    }

    #[test]
    fn separable_scores_tune_between_classes() {
        let scores = [0.1, 0.2, 0.3, 0.9, 1.0];
        let t = tune_threshold(&scores, &[N, N, N, A, A]).unwrap();
        assert_eq!(t, 0.3);
    }

    #[test]
    fn ties_prefer_larger_threshold() {
        // t = 0.8 and t = 0.1 both give F1 = 2/3; the larger wins
        let scores = [0.9, 0.8, 0.7, 0.6, 0.1];
        let labels = [A, N, N, A, N];
        let t = tune_threshold(&scores, &labels).unwrap();
        assert_eq!(t, 0.8);
    }
}
