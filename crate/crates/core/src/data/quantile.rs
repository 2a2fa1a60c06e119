use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::DataError;
use crate::linalg::quantile_sorted;

/// Maps every feature through its empirical CDF, estimated on a fixed
/// number of evenly spaced quantiles, onto the uniform distribution on
/// [0, 1]. Values falling on a run of tied quantiles map to the middle of
/// the tied level range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileTransform {
    pub n_quantiles: usize,
    /// `quantiles[j]` holds the ascending quantile values of feature `j`.
    pub quantiles: Vec<Vec<f64>>,
}

impl QuantileTransform {
    pub fn fit(x: &DMatrix<f64>, n_quantiles: usize) -> Self {
        let q = n_quantiles.max(2);
        let quantiles = x
            .column_iter()
            .map(|col| {
                let mut v: Vec<f64> = col.iter().copied().collect();
                v.sort_by(f64::total_cmp);
                (0..q)
                    .map(|k| quantile_sorted(&v, k as f64 / (q - 1) as f64))
                    .collect()
            })
            .collect();
        QuantileTransform {
            n_quantiles: q,
            quantiles,
        }
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>, DataError> {
        if x.ncols() != self.quantiles.len() {
            return Err(DataError::DimensionMismatch {
                expected: self.quantiles.len(),
                got: x.ncols(),
            });
        }
        Ok(DMatrix::from_fn(x.nrows(), x.ncols(), |i, j| {
            self.map_value(j, x[(i, j)])
        }))
    }

    pub fn map_value(&self, feature: usize, x: f64) -> f64 {
        let q = &self.quantiles[feature];
        let last = q.len() - 1;
        let level = |k: usize| k as f64 / last as f64;
        // ties at either end still take the middle of their run below
        if x < q[0] {
            return 0.0;
        }
        if x > q[last] {
            return 1.0;
        }
        // first index with q[k] >= x, and first index with q[k] > x
        let lo = q.partition_point(|&v| v < x);
        let hi = q.partition_point(|&v| v <= x);
        if hi > lo {
            // exact hit on one or more quantile values
            return 0.5 * (level(lo) + level(hi - 1));
        }
        let (a, b) = (lo - 1, lo);
        let t = (x - q[a]) / (q[b] - q[a]);
        level(a) + t * (level(b) - level(a))
    }
}
