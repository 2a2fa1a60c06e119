use serde::{Deserialize, Serialize};

use super::{AdvantageError, DatasetParams};
use crate::linalg::log2_floor1;

/// Error knobs that enter the quantum running times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumErrorParams {
    pub epsilon: f64,
    pub epsilon_theta: f64,
    pub eta: f64,
    pub delta: f64,
    /// Heuristic tomography divisor applied to the top-k term.
    #[serde(default = "one")]
    pub divisor: f64,
    /// Lloyd iterations, for the q-means variant.
    #[serde(default)]
    pub iterations: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl QuantumErrorParams {
    pub fn new(epsilon: f64, epsilon_theta: f64, eta: f64, delta: f64) -> Self {
        QuantumErrorParams {
            epsilon,
            epsilon_theta,
            eta,
            delta,
            divisor: 1.0,
            iterations: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostVariant {
    PccMajorOnly,
    PccMajorMinor,
    Recon,
    Qmeans,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub variant: CostVariant,
    #[serde(default = "one")]
    pub constant: f64,
    #[serde(default = "yes")]
    pub include_polylog: bool,
}

fn yes() -> bool {
    true
}

impl CostModel {
    pub fn new(variant: CostVariant) -> Self {
        CostModel {
            variant,
            constant: 1.0,
            include_polylog: true,
        }
    }
}

/// Breakdown of a quantum query count.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CostTerms {
    pub binary_search: f64,
    pub top_k: f64,
    pub least_q: f64,
    pub qmeans: f64,
}

impl CostTerms {
    pub fn total(&self) -> f64 {
        self.binary_search + self.top_k + self.least_q + self.qmeans
    }
}

fn positive(name: &'static str, v: f64) -> Result<f64, AdvantageError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(AdvantageError::InvalidInput(format!("{name} = {v} must be positive")))
    }
}

/// Term-by-term quantum query count.
pub fn quantum_terms(
    p: &DatasetParams,
    e: &QuantumErrorParams,
    cost: &CostModel,
) -> Result<CostTerms, AdvantageError> {
    let lg = |x: f64| if cost.include_polylog { log2_floor1(x) } else { 1.0 };
    let mu = positive("mu", p.mu)?;
    let d = positive("d", p.d)?;
    let mut t = CostTerms::default();

    if cost.variant == CostVariant::Qmeans {
        let k = positive("k", p.k as f64)?;
        let eta = positive("max_sq_norm", p.max_sq_norm)?;
        let delta = positive("delta", e.delta)?;
        let iters = e.iterations.ok_or(AdvantageError::MissingParam("iterations"))?;
        let per_iter = k * d * (eta / (delta * delta)) * p.kappa * (mu + k * eta / delta)
            + k * k * eta.powf(1.5) / (delta * delta) * p.kappa * mu;
        t.qmeans = cost.constant * per_iter * iters;
        return Ok(t);
    }

    let eps_theta = positive("epsilon_theta", e.epsilon_theta)?;
    let eta = positive("eta", e.eta)?;
    let eps = positive("epsilon", e.epsilon)?;
    let delta = positive("delta", e.delta)?;
    let theta = positive("theta", p.theta)?;
    let p_major = positive("p_major", p.p_major)?;
    let k = positive("k", p.k as f64)?;
    let norm = positive("spectral_norm", p.spectral_norm)?;

    t.binary_search = cost.constant * mu / (eps_theta * eta) * lg(mu / eps_theta);
    t.top_k = cost.constant * d * k * norm * mu / (theta * p_major.sqrt() * eps * delta * delta) * lg(k) * lg(d)
        / e.divisor.max(1.0);

    if cost.variant == CostVariant::PccMajorMinor {
        let theta_min = p.theta_min.ok_or(AdvantageError::MissingParam("theta_min"))?;
        let q = p.q.ok_or(AdvantageError::MissingParam("q"))? as f64;
        let p_min = p.p_minor.ok_or(AdvantageError::MissingParam("p_minor"))?;
        let sigma_min = positive("sigma_min", p.sigma_min)?;
        t.least_q = cost.constant * (theta_min / sigma_min) * (mu / eps) * q * d / positive("p_minor", p_min)?.sqrt();
    }
    Ok(t)
}

/// Quantum query count for the variant.
pub fn quantum_query_count(
    p: &DatasetParams,
    e: &QuantumErrorParams,
    cost: &CostModel,
) -> Result<f64, AdvantageError> {
    Ok(quantum_terms(p, e, cost)?.total())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassicalVariant {
    RandomizedPca,
    FullSvd,
    Lloyd,
}

/// Classical operation count. `iterations` is used by Lloyd only.
pub fn classical_op_count(n: f64, d: f64, k: f64, variant: ClassicalVariant, iterations: f64) -> f64 {
    match variant {
        ClassicalVariant::RandomizedPca => n * d * k * log2_floor1(k),
        ClassicalVariant::FullSvd => (n * d * d).min(n * n * d),
        ClassicalVariant::Lloyd => n * d * k * iterations.max(1.0),
    }
}
