use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{calibrate_threshold, check_conditioning, check_dim, Detector, DetectorError};
use crate::linalg::dot;
use crate::pca::PcaModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PccMode {
    MajorOnly,
    MajorMinor,
}

/// `Σ (eᵢᵀz)²/λᵢ` over the components of `model`.
fn weighted_sum(z: &[f64], model: &PcaModel) -> f64 {
    model
        .components
        .iter()
        .zip(&model.eigenvalues)
        .map(|(e, l)| {
            let y = dot(e, z);
            y * y / l
        })
        .sum()
}

/// `(T1, T2)`: T1 over the major model, T2 over the minor model (0 when
/// absent).
pub fn pcc_scores(z: &[f64], major: &PcaModel, minor: Option<&PcaModel>) -> Result<(f64, f64), DetectorError> {
    check_dim(major, z)?;
    check_conditioning(major)?;
    let t2 = match minor {
        Some(m) => {
            check_dim(m, z)?;
            check_conditioning(m)?;
            weighted_sum(z, m)
        }
        None => 0.0,
    };
    Ok((weighted_sum(z, major), t2))
}

/// Principal component classifier.
#[derive(Debug, Clone)]
pub struct PccModel {
    pub major: PcaModel,
    pub minor: Option<PcaModel>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub alpha: Option<f64>,
}

impl PccModel {
    pub fn new(major: PcaModel, minor: Option<PcaModel>) -> Result<Self, DetectorError> {
        check_conditioning(&major)?;
        if let Some(m) = &minor {
            check_conditioning(m)?;
        }
        Ok(PccModel {
            major,
            minor,
            c1: None,
            c2: None,
            alpha: None,
        })
    }

    pub fn mode(&self) -> PccMode {
        if self.minor.is_some() {
            PccMode::MajorMinor
        } else {
            PccMode::MajorOnly
        }
    }

    pub fn scores(&self, z: &[f64]) -> Result<(f64, f64), DetectorError> {
        pcc_scores(z, &self.major, self.minor.as_ref())
    }

    pub fn batch_scores(&self, rows: &[Vec<f64>]) -> Result<Vec<(f64, f64)>, DetectorError> {
        rows.par_iter().map(|z| self.scores(z)).collect()
    }

    /// Copy calibrated at false alarm rate `alpha` on precomputed
    /// validation-normal scores. In major+minor mode each statistic gets
    /// its own `(1−α)` quantile.
    pub fn calibrated(&self, normal_scores: &[(f64, f64)], alpha: f64) -> Result<Self, DetectorError> {
        let t1: Vec<f64> = normal_scores.iter().map(|s| s.0).collect();
        let c1 = calibrate_threshold(&t1, alpha)?;
        let c2 = match self.minor {
            Some(_) => {
                let t2: Vec<f64> = normal_scores.iter().map(|s| s.1).collect();
                Some(calibrate_threshold(&t2, alpha)?)
            }
            None => None,
        };
        Ok(PccModel {
            c1: Some(c1),
            c2,
            alpha: Some(alpha),
            ..self.clone()
        })
    }

    pub fn with_thresholds(mut self, c1: f64, c2: Option<f64>) -> Self {
        self.c1 = Some(c1);
        self.c2 = c2;
        self
    }

    /// Decision on precomputed scores.
    pub fn decide(&self, scores: (f64, f64)) -> Result<bool, DetectorError> {
        let c1 = self.c1.ok_or(DetectorError::Uncalibrated)?;
        let major = scores.0 > c1;
        Ok(match (self.mode(), self.c2) {
            (PccMode::MajorOnly, _) => major,
            (PccMode::MajorMinor, Some(c2)) => major || scores.1 > c2,
            (PccMode::MajorMinor, None) => return Err(DetectorError::Uncalibrated),
        })
    }
}

impl Detector for PccModel {
    fn is_attack(&self, z: &[f64]) -> Result<bool, DetectorError> {
        self.decide(self.scores(z)?)
    }
}
