//! Exact PCA of a standardized matrix.
//!
//! Eigenvalues are those of `XᵀX` itself, without a `1/(n-1)` factor;
//! singular values are their square roots. Detectors divide by the
//! eigenvalues and calibrate thresholds on the resulting scores, so the
//! scale convention cancels out. Every component is sign-normalized so its
//! largest-magnitude entry is positive.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataMatrix;
use crate::linalg::dot;

/// Singular values at or below `SIGMA_FLOOR * σ₁` are numerical zeros.
pub const SIGMA_FLOOR: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("need at least 2 rows and 1 column, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },
    #[error("target variance {0} outside (0, 1]")]
    InvalidTarget(f64),
    #[error("eigenvalue mass is zero; no selection can reach the target")]
    Unreachable,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("requested {requested} components but the model has {available}")]
    TooManyComponents { requested: usize, available: usize },
    #[error("model file error: {0}")]
    Io(String),
}

/// Per-component record of the error a simulated quantum routine injected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentError {
    /// Index of the component in the exact spectrum.
    pub index: usize,
    pub sigma_error: f64,
    pub lambda_error: f64,
    pub vector_error: f64,
    /// The routine hit its failure branch for this component.
    pub failed: bool,
}

/// Error budget requested from the simulators and the errors they
/// actually injected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCertificate {
    pub epsilon: f64,
    pub delta: f64,
    pub eta: Option<f64>,
    pub gamma: f64,
    /// Whether the vector bound is guaranteed by construction (bounded
    /// injection) or only empirically (sampled tomography).
    pub vector_bound_guaranteed: bool,
    pub components: Vec<ComponentError>,
}

impl ErrorCertificate {
    /// Every component that did not fail satisfies `|σ̄-σ| ≤ ε`,
    /// `|λ̄-λ| ≤ 2ε√λ` and, when guaranteed, `‖ē-e‖ ≤ δ`.
    pub fn is_sound(&self, exact: &PcaModel) -> bool {
        self.components.iter().filter(|c| !c.failed).all(|c| {
            let lambda = exact.eigenvalues[c.index];
            let tol = 1e-12 * (1.0 + lambda);
            c.sigma_error <= self.epsilon + tol
                && c.lambda_error <= 2.0 * self.epsilon * lambda.sqrt() + tol
                && (!self.vector_bound_guaranteed || c.vector_error <= self.delta + 1e-12)
        })
    }

    pub fn failures(&self) -> usize {
        self.components.iter().filter(|c| c.failed).count()
    }
}

/// A set of principal components with their spectrum.
///
/// An exact model holds every component of the decomposition; subsets and
/// noisy models produced by the quantum simulators keep the same shape,
/// with `source_indices` pointing back into the exact spectrum and
/// `total_variance` carried over so factor-score ratios stay comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub dim: usize,
    pub n_samples: usize,
    /// Unit vectors, one per component.
    pub components: Vec<Vec<f64>>,
    pub eigenvalues: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub source_indices: Vec<usize>,
    /// Rank of the exact decomposition (non-floor singular values).
    pub rank: usize,
    /// Sum of all eigenvalues of the exact decomposition.
    pub total_variance: f64,
    #[serde(default)]
    pub certificate: Option<ErrorCertificate>,
}

impl PcaModel {
    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn is_exact(&self) -> bool {
        self.certificate.is_none()
    }

    /// Factor-score ratios `λᵢ / Σⱼ λⱼ`.
    pub fn ratios(&self) -> Vec<f64> {
        if self.total_variance <= 0.0 {
            return vec![0.0; self.len()];
        }
        self.eigenvalues
            .iter()
            .map(|l| l / self.total_variance)
            .collect()
    }

    pub fn sigma_floor(&self) -> f64 {
        SIGMA_FLOOR * self.singular_values.iter().copied().fold(0.0, f64::max)
    }

    /// Sub-model with the listed positions (positions in this model).
    pub fn subset(&self, positions: &[usize]) -> PcaModel {
        PcaModel {
            dim: self.dim,
            n_samples: self.n_samples,
            components: positions.iter().map(|&i| self.components[i].clone()).collect(),
            eigenvalues: positions.iter().map(|&i| self.eigenvalues[i]).collect(),
            singular_values: positions.iter().map(|&i| self.singular_values[i]).collect(),
            source_indices: positions.iter().map(|&i| self.source_indices[i]).collect(),
            rank: self.rank,
            total_variance: self.total_variance,
            certificate: self.certificate.clone(),
        }
    }

    /// The first `k` components.
    pub fn top(&self, k: usize) -> PcaModel {
        self.subset(&(0..k.min(self.len())).collect::<Vec<_>>())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PcaError> {
        let json = serde_json::to_string_pretty(self).map_err(|e| PcaError::Io(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| PcaError::Io(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PcaError> {
        let s = std::fs::read_to_string(path).map_err(|e| PcaError::Io(e.to_string()))?;
        serde_json::from_str(&s).map_err(|e| PcaError::Io(e.to_string()))
    }
}

/// Flips `v` so that its largest-magnitude entry is positive.
pub fn canonical_sign(v: &mut [f64]) {
    let pivot = v
        .iter()
        .copied()
        .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Full SVD of the training matrix.
pub fn fit_exact_pca(train: &DataMatrix) -> Result<PcaModel, PcaError> {
    fit_matrix(&train.values)
}

pub fn fit_matrix(x: &DMatrix<f64>) -> Result<PcaModel, PcaError> {
    let (n, d) = x.shape();
    if n < 2 || d < 1 {
        return Err(PcaError::TooSmall { rows: n, cols: d });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(PcaError::NonFinite);
    }
    let svd = x.clone().svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let mut components = Vec::with_capacity(order.len());
    let mut singular_values = Vec::with_capacity(order.len());
    for &i in &order {
        let mut e: Vec<f64> = v_t.row(i).iter().copied().collect();
        canonical_sign(&mut e);
        components.push(e);
        singular_values.push(svd.singular_values[i].max(0.0));
    }
    let eigenvalues: Vec<f64> = singular_values.iter().map(|s| s * s).collect();
    let sigma1 = singular_values.first().copied().unwrap_or(0.0);
    let rank = singular_values
        .iter()
        .filter(|&&s| s > SIGMA_FLOOR * sigma1 && s > 0.0)
        .count();
    let total_variance = eigenvalues.iter().sum();
    Ok(PcaModel {
        dim: d,
        n_samples: n,
        source_indices: (0..components.len()).collect(),
        components,
        eigenvalues,
        singular_values,
        rank,
        total_variance,
        certificate: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMode {
    Major,
    Minor,
}

/// Components retained for a variance target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceSelection {
    pub mode: SelectionMode,
    /// Positions in the model, ascending.
    pub indices: Vec<usize>,
    /// Explained variance of the retained set.
    pub explained: f64,
    /// θ for major selections (retain σ > θ), θ_min for minor ones
    /// (retain σ < θ_min).
    pub threshold: f64,
}

impl VarianceSelection {
    pub fn count(&self) -> usize {
        self.indices.len()
    }
}

const RATIO_SLACK: f64 = 1e-12;

/// Smallest set reaching `p_target` of explained variance.
///
/// Major mode walks the spectrum from the top, minor mode from the
/// smallest non-floor singular value upward. Singular values tied with
/// the boundary are included. The threshold is the midpoint between the
/// boundary singular value and its outside neighbour.
pub fn select_for_variance(
    model: &PcaModel,
    p_target: f64,
    mode: SelectionMode,
) -> Result<VarianceSelection, PcaError> {
    if !(p_target > 0.0 && p_target <= 1.0) {
        return Err(PcaError::InvalidTarget(p_target));
    }
    if model.total_variance <= 0.0 {
        return Err(PcaError::Unreachable);
    }
    let floor = model.sigma_floor();
    let sv = &model.singular_values;
    let ratios = model.ratios();
    // walk order: descending for major, ascending (floor excluded) for minor
    let order: Vec<usize> = match mode {
        SelectionMode::Major => (0..model.len()).collect(),
        SelectionMode::Minor => (0..model.len())
            .rev()
            .filter(|&i| sv[i] > floor && sv[i] > 0.0)
            .collect(),
    };
    let mut cum = 0.0;
    let mut taken = 0;
    while taken < order.len() {
        cum += ratios[order[taken]];
        taken += 1;
        if cum + RATIO_SLACK >= p_target {
            break;
        }
    }
    if cum + RATIO_SLACK < p_target {
        return Err(PcaError::Unreachable);
    }
    // absorb ties with the boundary value
    let boundary = sv[order[taken - 1]];
    while taken < order.len() && (sv[order[taken]] - boundary).abs() <= 1e-12 * boundary.max(1.0) {
        cum += ratios[order[taken]];
        taken += 1;
    }
    let outside = order.get(taken).map(|&i| sv[i]);
    let threshold = match (mode, outside) {
        (_, Some(next)) => 0.5 * (boundary + next),
        (SelectionMode::Major, None) => 0.5 * boundary,
        (SelectionMode::Minor, None) => boundary * 1.5,
    };
    let mut indices: Vec<usize> = order[..taken].to_vec();
    indices.sort_unstable();
    Ok(VarianceSelection {
        mode,
        indices,
        explained: cum.min(1.0),
        threshold,
    })
}

/// Selection by an explicit threshold: σ > θ for major, floor < σ < θ for
/// minor.
pub fn select_by_threshold(model: &PcaModel, threshold: f64, mode: SelectionMode) -> VarianceSelection {
    let floor = model.sigma_floor();
    let ratios = model.ratios();
    let indices: Vec<usize> = (0..model.len())
        .filter(|&i| {
            let s = model.singular_values[i];
            match mode {
                SelectionMode::Major => s > threshold,
                SelectionMode::Minor => s > floor && s > 0.0 && s < threshold,
            }
        })
        .collect();
    let explained = indices.iter().map(|&i| ratios[i]).sum();
    VarianceSelection {
        mode,
        indices,
        explained,
        threshold,
    }
}

/// Projection onto the first `k` components and back.
#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction {
    pub projection: Vec<f64>,
    pub reconstruction: Vec<f64>,
    pub sse: f64,
}

pub fn project_reconstruct(z: &[f64], model: &PcaModel, k: usize) -> Result<Reconstruction, PcaError> {
    if z.len() != model.dim {
        return Err(PcaError::DimensionMismatch {
            expected: model.dim,
            got: z.len(),
        });
    }
    if k > model.len() {
        return Err(PcaError::TooManyComponents {
            requested: k,
            available: model.len(),
        });
    }
    let projection: Vec<f64> = model.components[..k].iter().map(|e| dot(e, z)).collect();
    let mut reconstruction = vec![0.0; z.len()];
    for (y, e) in projection.iter().zip(&model.components[..k]) {
        for (r, ej) in reconstruction.iter_mut().zip(e) {
            *r += y * ej;
        }
    }
    let sse = z
        .iter()
        .zip(&reconstruction)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(Reconstruction {
        projection,
        reconstruction,
        sse,
    })
}

/// Synthetic model with a prescribed spectrum and the canonical basis;
/// handy for exercising selection logic.
pub fn model_from_eigenvalues(eigenvalues: &[f64]) -> PcaModel {
    let d = eigenvalues.len();
    let components = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e
        })
        .collect();
    let singular_values: Vec<f64> = eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    let s1 = singular_values.first().copied().unwrap_or(0.0);
    PcaModel {
        dim: d,
        n_samples: 0,
        components,
        eigenvalues: eigenvalues.to_vec(),
        rank: singular_values.iter().filter(|&&s| s > SIGMA_FLOOR * s1 && s > 0.0).count(),
        singular_values,
        source_indices: (0..d).collect(),
        total_variance: eigenvalues.iter().sum(),
        certificate: None,
    }
}
