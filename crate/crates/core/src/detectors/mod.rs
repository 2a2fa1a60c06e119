//! PCA-based anomaly detectors, threshold calibration and metrics.
//!
//! All detectors work on any [`PcaModel`], exact or noisy. Scores are
//! compared to thresholds with a strict `>`: a score equal to its threshold
//! is normal.

mod ensemble;
mod metrics;
mod pcc;
mod recon;

use rayon::prelude::*;
use thiserror::Error;

pub use ensemble::{ensemble_scores, EnsembleModel, Similarity};
pub use metrics::{evaluate, Metrics};
pub use pcc::{pcc_scores, PccMode, PccModel};
pub use recon::{recon_score, tune_threshold, ReconModel};

use crate::data::Label;
use crate::pca::{PcaError, PcaModel, SIGMA_FLOOR};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("no scores to calibrate on")]
    EmptyScores,
    #[error("false alarm rate {0} outside (0, 1)")]
    InvalidAlpha(f64),
    #[error("component {index} has eigenvalue {lambda}, too small to divide by")]
    IllConditioned { index: usize, lambda: f64 },
    #[error("zero vector has no direction for cosine or correlation scores")]
    ZeroVector,
    #[error("constant vector has no correlation")]
    ConstantVector,
    #[error("detector used before calibration")]
    Uncalibrated,
    #[error("{predictions} predictions for {labels} labels")]
    LengthMismatch { predictions: usize, labels: usize },
    #[error("no attack labels, recall is undefined")]
    NoPositives,
    #[error("model has no components")]
    EmptyModel,
    #[error(transparent)]
    Pca(#[from] PcaError),
}

/// Common interface of the calibrated detectors.
pub trait Detector: Sync {
    fn is_attack(&self, z: &[f64]) -> Result<bool, DetectorError>;

    fn classify(&self, z: &[f64]) -> Result<Label, DetectorError> {
        Ok(if self.is_attack(z)? {
            Label::Attack
        } else {
            Label::Normal
        })
    }

    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<Label>, DetectorError> {
        rows.par_iter().map(|z| self.classify(z)).collect()
    }
}

/// Nearest-rank upper quantile: the score at 1-based rank `⌈(1−α)N⌉` of
/// the ascending sort. Raising `α` never raises the threshold.
pub fn calibrate_threshold(scores: &[f64], alpha: f64) -> Result<f64, DetectorError> {
    if scores.is_empty() {
        return Err(DetectorError::EmptyScores);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(DetectorError::InvalidAlpha(alpha));
    }
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let rank = (((1.0 - alpha) * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(s[rank - 1])
}

/// Rejects components whose eigenvalue would blow up a `y²/λ` sum.
pub(crate) fn check_conditioning(model: &PcaModel) -> Result<(), DetectorError> {
    if model.is_empty() {
        return Err(DetectorError::EmptyModel);
    }
    let floor = (SIGMA_FLOOR * SIGMA_FLOOR) * model.total_variance.max(f64::MIN_POSITIVE);
    for (pos, &lambda) in model.eigenvalues.iter().enumerate() {
        if !(lambda > floor) {
            return Err(DetectorError::IllConditioned {
                index: model.source_indices[pos],
                lambda,
            });
        }
    }
    Ok(())
}

pub(crate) fn check_dim(model: &PcaModel, z: &[f64]) -> Result<(), DetectorError> {
    if z.len() != model.dim {
        return Err(PcaError::DimensionMismatch {
            expected: model.dim,
            got: z.len(),
        }
        .into());
    }
    Ok(())
}
