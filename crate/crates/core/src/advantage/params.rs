use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AdvantageError;
use crate::pca::{PcaModel, VarianceSelection};

pub const MU_GRID_POINTS: usize = 101;

/// Measured quantities entering the query-count formulas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetParams {
    pub n: f64,
    pub d: f64,
    pub spectral_norm: f64,
    pub frobenius_norm: f64,
    pub mu: f64,
    /// Grid point attaining μ, `None` when the Frobenius norm is smaller.
    pub mu_p: Option<f64>,
    /// `σ₁/σ_min`, with numerical zeros excluded.
    pub kappa: f64,
    /// Smallest singular value above the numerical-zero floor.
    pub sigma_min: f64,
    pub theta: f64,
    pub p_major: f64,
    pub k: usize,
    #[serde(default)]
    pub theta_min: Option<f64>,
    #[serde(default)]
    pub p_minor: Option<f64>,
    #[serde(default)]
    pub q: Option<usize>,
    /// Largest squared row norm.
    pub max_sq_norm: f64,
}

/// `s_q(M) = maxᵢ ‖Mᵢ‖_q^q` for rows (`by_rows`) or columns; `q = 0`
/// counts non-zeros.
fn s_q(x: &DMatrix<f64>, q: f64, by_rows: bool) -> f64 {
    let pow = |v: f64| {
        if q == 0.0 {
            if v != 0.0 {
                1.0
            } else {
                0.0
            }
        } else {
            v.abs().powf(q)
        }
    };
    if by_rows {
        (0..x.nrows())
            .map(|i| x.row(i).iter().map(|&v| pow(v)).sum::<f64>())
            .fold(0.0, f64::max)
    } else {
        (0..x.ncols())
            .map(|j| x.column(j).iter().map(|&v| pow(v)).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// `μ(X) = min(‖X‖_F, min_p √(s_{2p}(X)·s_{2(1−p)}(Xᵀ)))` over a uniform
/// grid of `points` values of `p` in `[0, 1]`.
pub fn mu_with_grid(x: &DMatrix<f64>, points: usize) -> (f64, Option<f64>) {
    let fro = x.norm();
    let points = points.max(2);
    let best = (0..points)
        .into_par_iter()
        .map(|i| {
            let p = i as f64 / (points - 1) as f64;
            let v = (s_q(x, 2.0 * p, true) * s_q(x, 2.0 * (1.0 - p), false)).sqrt();
            (v, p)
        })
        .reduce(|| (f64::INFINITY, 0.0), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    if best.0 < fro {
        (best.0, Some(best.1))
    } else {
        (fro, None)
    }
}

/// Largest singular value by power iteration on `XᵀX`, to relative
/// tolerance `1e-6`.
pub fn spectral_norm(x: &DMatrix<f64>) -> f64 {
    let d = x.ncols();
    if d == 0 || x.nrows() == 0 {
        return 0.0;
    }
    // deterministic start with weight on every coordinate
    let mut v = DVector::from_fn(d, |i, _| 1.0 + (i as f64 * 0.618_033_988_7).fract());
    v /= v.norm();
    let mut est = 0.0;
    for _ in 0..10_000 {
        let w = x.tr_mul(&(x * &v));
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        let next = nw.sqrt();
        v = w / nw;
        if (next - est).abs() <= 1e-9 * next {
            return next;
        }
        est = next;
    }
    est
}

/// Measures every parameter from the standardized training matrix, its
/// exact model and the major (and optional minor) selection.
pub fn measure_params(
    x: &DMatrix<f64>,
    model: &PcaModel,
    major: &VarianceSelection,
    minor: Option<&VarianceSelection>,
) -> Result<DatasetParams, AdvantageError> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(AdvantageError::NonFinite);
    }
    if x.ncols() != model.dim {
        return Err(AdvantageError::InvalidInput(format!(
            "matrix has {} columns, model {}",
            x.ncols(),
            model.dim
        )));
    }
    let (mu, mu_p) = mu_with_grid(x, MU_GRID_POINTS);
    let floor = model.sigma_floor();
    let sigma1 = model.singular_values.first().copied().unwrap_or(0.0);
    let sigma_min = model
        .singular_values
        .iter()
        .copied()
        .filter(|&s| s > floor && s > 0.0)
        .fold(f64::INFINITY, f64::min);
    let (sigma_min, kappa) = if sigma_min.is_finite() {
        (sigma_min, (sigma1 / sigma_min).max(1.0))
    } else {
        (0.0, 1.0)
    };
    let max_sq_norm = (0..x.nrows())
        .map(|i| x.row(i).norm_squared())
        .fold(0.0, f64::max);
    Ok(DatasetParams {
        n: x.nrows() as f64,
        d: x.ncols() as f64,
        spectral_norm: spectral_norm(x),
        frobenius_norm: x.norm(),
        mu,
        mu_p,
        kappa,
        sigma_min,
        theta: major.threshold,
        p_major: major.explained,
        k: major.count(),
        theta_min: minor.map(|m| m.threshold),
        p_minor: minor.map(|m| m.explained),
        q: minor.map(|m| m.count()),
        max_sq_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_mu() {
        let x = DMatrix::<f64>::identity(2, 2);
        let (mu, p) = mu_with_grid(&x, MU_GRID_POINTS);
        assert!((mu - 1.0).abs() < 1e-12);
        assert!(p.is_some());
    }

    #[test]
    fn diagonal_norms() {
        let x = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        assert!((spectral_norm(&x) - 3.0).abs() < 1e-6);
        let model = crate::pca::fit_matrix(&x).unwrap();
        let sel = crate::pca::select_for_variance(&model, 0.5, crate::pca::SelectionMode::Major).unwrap();
        let p = measure_params(&x, &model, &sel, None).unwrap();
        assert!((p.kappa - 3.0).abs() < 1e-9);
        assert!((p.frobenius_norm - 10f64.sqrt()).abs() < 1e-12);
        assert!(p.mu <= p.frobenius_norm);
    }
}
