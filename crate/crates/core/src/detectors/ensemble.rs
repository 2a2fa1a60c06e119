use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{calibrate_threshold, check_conditioning, check_dim, Detector, DetectorError};
use crate::linalg::{dot, norm, pearson};
use crate::pca::PcaModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Similarity {
    Dot,
    Cosine,
    Correlation,
}

impl Similarity {
    pub const ALL: [Similarity; 3] = [Similarity::Dot, Similarity::Cosine, Similarity::Correlation];

    fn project(self, e: &[f64], z: &[f64], z_norm: f64) -> Result<f64, DetectorError> {
        match self {
            Similarity::Dot => Ok(dot(e, z)),
            Similarity::Cosine => {
                if z_norm == 0.0 {
                    return Err(DetectorError::ZeroVector);
                }
                Ok(dot(e, z) / (norm(e) * z_norm))
            }
            Similarity::Correlation => {
                if z_norm == 0.0 {
                    return Err(DetectorError::ZeroVector);
                }
                pearson(e, z).ok_or(DetectorError::ConstantVector)
            }
        }
    }
}

fn sum_for(z: &[f64], z_norm: f64, model: &PcaModel, sim: Similarity) -> Result<f64, DetectorError> {
    let mut total = 0.0;
    for (e, l) in model.components.iter().zip(&model.eigenvalues) {
        let y = sim.project(e, z, z_norm)?;
        total += y * y / l;
    }
    Ok(total)
}

/// Scores in the order dot, cosine, correlation over the majors, then the
/// same three over the minors when a minor model is given.
pub fn ensemble_scores(z: &[f64], major: &PcaModel, minor: Option<&PcaModel>) -> Result<Vec<f64>, DetectorError> {
    check_dim(major, z)?;
    let z_norm = norm(z);
    let mut out = Vec::with_capacity(6);
    for m in std::iter::once(major).chain(minor) {
        check_dim(m, z)?;
        for sim in Similarity::ALL {
            out.push(sum_for(z, z_norm, m, sim)?);
        }
    }
    Ok(out)
}

/// Flags a sample when any of its similarity sums exceeds its threshold.
#[derive(Debug, Clone)]
pub struct EnsembleModel {
    pub major: PcaModel,
    pub minor: Option<PcaModel>,
    pub thresholds: Option<Vec<f64>>,
    pub alpha: Option<f64>,
}

impl EnsembleModel {
    pub fn new(major: PcaModel, minor: Option<PcaModel>) -> Result<Self, DetectorError> {
        check_conditioning(&major)?;
        if let Some(m) = &minor {
            check_conditioning(m)?;
        }
        Ok(EnsembleModel {
            major,
            minor,
            thresholds: None,
            alpha: None,
        })
    }

    pub fn scores(&self, z: &[f64]) -> Result<Vec<f64>, DetectorError> {
        ensemble_scores(z, &self.major, self.minor.as_ref())
    }

    pub fn batch_scores(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, DetectorError> {
        rows.par_iter().map(|z| self.scores(z)).collect()
    }

    /// One `(1−α)` quantile per criterion, all on the same validation set.
    pub fn calibrated(&self, normal_scores: &[Vec<f64>], alpha: f64) -> Result<Self, DetectorError> {
        let width = normal_scores.first().map(Vec::len).ok_or(DetectorError::EmptyScores)?;
        let thresholds = (0..width)
            .map(|j| {
                let col: Vec<f64> = normal_scores.iter().map(|s| s[j]).collect();
                calibrate_threshold(&col, alpha)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EnsembleModel {
            thresholds: Some(thresholds),
            alpha: Some(alpha),
            ..self.clone()
        })
    }

    pub fn with_thresholds(mut self, thresholds: Vec<f64>) -> Self {
        self.thresholds = Some(thresholds);
        self
    }

    pub fn decide(&self, scores: &[f64]) -> Result<bool, DetectorError> {
        let th = self.thresholds.as_ref().ok_or(DetectorError::Uncalibrated)?;
        if th.len() != scores.len() {
            return Err(DetectorError::Uncalibrated);
        }
        Ok(scores.iter().zip(th).any(|(s, c)| s > c))
    }
}

impl Detector for EnsembleModel {
    fn is_attack(&self, z: &[f64]) -> Result<bool, DetectorError> {
        self.decide(&self.scores(z)?)
    }
}
