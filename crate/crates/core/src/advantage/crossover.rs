use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{classical_op_count, quantum_query_count, AdvantageError, ClassicalVariant, CostModel, DatasetParams, QuantumErrorParams};

/// How the measured norms change when the dataset is scaled to `n` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthModel {
    /// Held at the measured values.
    #[default]
    Fixed,
    /// Norm-like quantities scale as `√(n / n_measured)`.
    SqrtN,
}

impl GrowthModel {
    pub fn scale(self, template: &DatasetParams, n: f64, d: f64) -> DatasetParams {
        let mut p = template.clone();
        p.n = n;
        p.d = d;
        if self == GrowthModel::SqrtN && template.n > 0.0 {
            let s = (n / template.n).sqrt();
            p.spectral_norm *= s;
            p.frobenius_norm *= s;
            p.mu *= s;
            p.theta *= s;
            p.sigma_min *= s;
            p.theta_min = p.theta_min.map(|t| t * s);
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossoverCell {
    pub n: f64,
    pub d: f64,
    pub quantum: f64,
    pub classical: f64,
    pub advantage: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub d: f64,
    /// Smallest grid `n` with an advantage.
    pub grid_n: Option<f64>,
    /// Crossing point located by bisection in `log n`.
    pub analytic_n: Option<f64>,
    /// Every grid point above `grid_n` is advantageous.
    pub single_crossing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrossoverReport {
    pub cells: Vec<CrossoverCell>,
    pub frontier: Vec<FrontierPoint>,
    pub classical: ClassicalVariant,
    pub growth: GrowthModel,
}

impl CrossoverReport {
    pub fn frontier_at(&self, d: f64) -> Option<&FrontierPoint> {
        self.frontier.iter().find(|f| f.d == d)
    }

    pub fn any_advantage(&self) -> bool {
        self.frontier.iter().any(|f| f.grid_n.is_some() || f.analytic_n.is_some())
    }
}

const N_MAX: f64 = 1e18;

fn counts(
    template: &DatasetParams,
    errors: &QuantumErrorParams,
    cost: &CostModel,
    classical: ClassicalVariant,
    growth: GrowthModel,
    n: f64,
    d: f64,
) -> Result<(f64, f64), AdvantageError> {
    let p = growth.scale(template, n, d);
    let q = quantum_query_count(&p, errors, cost)?;
    let c = classical_op_count(n, d, p.k as f64, classical, errors.iterations.unwrap_or(1.0));
    Ok((q, c))
}

/// Evaluates both counts over the grid and locates, for each `d`, the
/// smallest `n` at which the quantum count is strictly lower.
pub fn find_crossover(
    template: &DatasetParams,
    errors: &QuantumErrorParams,
    cost: &CostModel,
    classical: ClassicalVariant,
    growth: GrowthModel,
    n_grid: &[f64],
    d_grid: &[f64],
) -> Result<CrossoverReport, AdvantageError> {
    if n_grid.is_empty() || d_grid.is_empty() {
        return Err(AdvantageError::InvalidInput("crossover grids must be non-empty".into()));
    }
    if n_grid.iter().chain(d_grid).any(|v| !(*v >= 1.0)) {
        return Err(AdvantageError::InvalidInput("grid values must be >= 1".into()));
    }
    let mut ns = n_grid.to_vec();
    ns.sort_by(f64::total_cmp);
    let cells: Vec<CrossoverCell> = d_grid
        .par_iter()
        .flat_map_iter(|&d| ns.iter().map(move |&n| (n, d)))
        .map(|(n, d)| {
            let (quantum, classical) = counts(template, errors, cost, classical, growth, n, d)?;
            Ok(CrossoverCell {
                n,
                d,
                quantum,
                classical,
                advantage: quantum < classical,
            })
        })
        .collect::<Result<_, AdvantageError>>()?;

    let mut frontier = Vec::with_capacity(d_grid.len());
    for &d in d_grid {
        let row: Vec<&CrossoverCell> = cells.iter().filter(|c| c.d == d).collect();
        let first = row.iter().position(|c| c.advantage);
        let single_crossing = first.is_none_or(|i| row[i..].iter().all(|c| c.advantage));
        let analytic_n = bisect(template, errors, cost, classical, growth, d)?;
        frontier.push(FrontierPoint {
            d,
            grid_n: first.map(|i| row[i].n),
            analytic_n,
            single_crossing,
        });
    }
    Ok(CrossoverReport {
        cells,
        frontier,
        classical,
        growth,
    })
}

/// Crossing point of `classical(n) = quantum(n)` by bisection on `log n`
/// over `[1, 10¹⁸]`; `None` when the quantum count never drops below.
fn bisect(
    template: &DatasetParams,
    errors: &QuantumErrorParams,
    cost: &CostModel,
    classical: ClassicalVariant,
    growth: GrowthModel,
    d: f64,
) -> Result<Option<f64>, AdvantageError> {
    let adv = |n: f64| -> Result<bool, AdvantageError> {
        let (q, c) = counts(template, errors, cost, classical, growth, n, d)?;
        Ok(q < c)
    };
    if !adv(N_MAX)? {
        return Ok(None);
    }
    if adv(1.0)? {
        return Ok(Some(1.0));
    }
    let (mut lo, mut hi) = (0.0f64, N_MAX.log10());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if adv(10f64.powf(mid))? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok(Some(10f64.powf(hi)))
}

#[cfg(test)]
mod tests {
    use super::super::CostVariant;
    use super::*;

    fn template() -> DatasetParams {
        DatasetParams {
            n: 5000.0,
            d: 50.0,
            spectral_norm: 100.0,
            frobenius_norm: 400.0,
            mu: 200.0,
            mu_p: None,
            kappa: 10.0,
            sigma_min: 2.0,
            theta: 40.0,
            p_major: 0.7,
            k: 6,
            theta_min: None,
            p_minor: None,
            q: None,
            max_sq_norm: 60.0,
        }
    }

    #[test]
    fn frontier_matches_closed_form() {
        let p = template();
        let e = QuantumErrorParams::new(1.0, 1.0, 0.1, 0.1);
        let cost = CostModel::new(CostVariant::PccMajorOnly);
        let q = quantum_query_count(&p, &e, &cost).unwrap();
        let expected = q / (50.0 * 6.0 * 6f64.log2());
        let grid: Vec<f64> = (0..=40).map(|i| 10f64.powf(i as f64 * 0.25)).collect();
        let r = find_crossover(&p, &e, &cost, ClassicalVariant::RandomizedPca, GrowthModel::Fixed, &grid, &[50.0])
            .unwrap();
        let f = r.frontier_at(50.0).unwrap();
        assert!((f.analytic_n.unwrap() / expected - 1.0).abs() < 1e-6);
        assert!(f.single_crossing);
        assert!(f.grid_n.unwrap() >= expected);
    }

    #[test]
    fn dominated_case_has_no_frontier() {
        let mut p = template();
        p.theta = 1e-30;
        let e = QuantumErrorParams::new(1e-9, 1e-9, 1e-9, 1e-9);
        let cost = CostModel::new(CostVariant::PccMajorOnly);
        let r = find_crossover(&p, &e, &cost, ClassicalVariant::RandomizedPca, GrowthModel::Fixed, &[1e3, 1e6], &[10.0])
            .unwrap();
        assert!(!r.any_advantage());
    }
}
