//! Noisy quantum PCA model extraction: threshold search over perturbed
//! singular values, then top-k (major) and least-q (minor) extraction with
//! every injected error recorded in a certificate.
//!
//! Selections use consistent phase estimates at precision `ε_θ`, so the
//! component set chosen by the threshold search is exactly the one the
//! extractors retain. Reported singular values use a separate estimate at
//! precision `ε`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{distance, dot, normalize};
use crate::pca::{ComponentError, ErrorCertificate, PcaError, PcaModel, SelectionMode};
use crate::qsim::{tomography, NoiseContext, QsimError, TomographyNorm, TomographyPlan};

#[derive(Debug, Error)]
pub enum QpcaError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(
        "no threshold explains {target} of the variance within η = {eta}; closest reaches {}",
        nearest.explained
    )]
    NoFeasibleTheta {
        target: f64,
        eta: f64,
        /// Candidate with the smallest gap to the target.
        nearest: Box<ThetaSearch>,
        /// Smallest candidate reaching the target.
        reaching: Box<ThetaSearch>,
    },
    #[error("no {0:?} component passes the threshold")]
    EmptySelection(SelectionMode),
    #[error(transparent)]
    Pca(#[from] PcaError),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

/// How component vectors are perturbed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorNoise {
    /// Random orthogonal direction, magnitude uniform in `[δ/2, δ]`.
    #[default]
    Bounded,
    /// Sampled tomography with `⌈N(δ)/h⌉` samples.
    Tomography,
}

/// Error knobs of one extraction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QpcaRequest {
    /// Variance target of the major components.
    pub p_major: f64,
    /// Variance target of the minor components, used when no explicit
    /// `theta_min` is given.
    #[serde(default)]
    pub p_minor: Option<f64>,
    #[serde(default)]
    pub theta_min: Option<f64>,
    /// Singular-value error.
    pub epsilon: f64,
    /// Singular-value error during the threshold search.
    pub epsilon_theta: f64,
    /// Variance tolerance of the search.
    pub eta: f64,
    /// Component-vector error.
    pub delta: f64,
    /// Failure probability of each estimate.
    #[serde(default)]
    pub gamma: f64,
    /// Heuristic tomography divisor.
    #[serde(default = "one")]
    pub divisor: f64,
    #[serde(default)]
    pub vector_noise: VectorNoise,
}

fn one() -> f64 {
    1.0
}

impl QpcaRequest {
    pub fn new(p_major: f64, epsilon: f64, epsilon_theta: f64, eta: f64, delta: f64) -> Self {
        QpcaRequest {
            p_major,
            p_minor: None,
            theta_min: None,
            epsilon,
            epsilon_theta,
            eta,
            delta,
            gamma: 0.0,
            divisor: 1.0,
            vector_noise: VectorNoise::Bounded,
        }
    }

    /// Every error knob at `1e-12`.
    pub fn zero_noise(p_major: f64) -> Self {
        QpcaRequest::new(p_major, 1e-12, 1e-12, 1e-12, 1e-12)
    }

    pub fn validate(&self) -> Result<(), QpcaError> {
        let bad = |m: String| Err(QpcaError::InvalidRequest(m));
        for (name, v) in [
            ("epsilon", self.epsilon),
            ("epsilon_theta", self.epsilon_theta),
            ("eta", self.eta),
            ("delta", self.delta),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.p_major > 0.0 && self.p_major <= 1.0) {
            return bad(format!("p_major {} outside (0, 1]", self.p_major));
        }
        if let Some(p) = self.p_minor {
            if !(p > 0.0 && p <= 1.0) {
                return bad(format!("p_minor {p} outside (0, 1]"));
            }
        }
        if self.eta >= self.p_major {
            return bad(format!("eta {} must be below p_major {}", self.eta, self.p_major));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if !(self.divisor >= 1.0) {
            return bad(format!("divisor {} must be >= 1", self.divisor));
        }
        if let Some(t) = self.theta_min {
            if !(t > 0.0) {
                return bad(format!("theta_min {t} must be positive"));
            }
        }
        Ok(())
    }
}

/// Outcome of the threshold search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaSearch {
    pub mode: SelectionMode,
    pub theta: f64,
    /// Positions in the exact model whose estimated σ falls on the
    /// retained side of `theta`, ascending.
    pub selected: Vec<usize>,
    /// Exact variance share of the selected components.
    pub explained: f64,
    /// `|p_target − explained|`.
    pub gap: f64,
    /// Bisection depth `⌈log₂(σ₁/ε_θ)⌉`.
    pub iterations: u32,
}

/// Consistent estimate of every singular value at precision `eps`.
fn estimated_sigmas(exact: &PcaModel, eps: f64, gamma: f64, ctx: &mut NoiseContext) -> Vec<f64> {
    exact
        .singular_values
        .iter()
        .map(|&s| ctx.phase_with_failure(s, eps, gamma).value)
        .collect()
}

fn bisection_depth(sigma1: f64, eps_theta: f64) -> u32 {
    if sigma1 <= eps_theta {
        return 1;
    }
    (sigma1 / eps_theta).log2().ceil().clamp(1.0, 4096.0) as u32
}

/// Threshold search over perturbed singular values.
///
/// Candidates are the prefixes of the estimated spectrum (sorted from the
/// top for majors, from the smallest non-floor value for minors). The
/// smallest prefix reaching `p_target` is returned when within `η`,
/// otherwise the largest prefix falling short of it; the threshold is the
/// midpoint between the boundary estimates.
pub fn quantum_binary_search_theta(
    exact: &PcaModel,
    p_target: f64,
    eps_theta: f64,
    eta: f64,
    mode: SelectionMode,
    ctx: &mut NoiseContext,
) -> Result<ThetaSearch, QpcaError> {
    let gamma = ctx.failure_prob();
    search_with(exact, p_target, eps_theta, eta, gamma, mode, ctx)
}

fn search_with(
    exact: &PcaModel,
    p_target: f64,
    eps_theta: f64,
    eta: f64,
    gamma: f64,
    mode: SelectionMode,
    ctx: &mut NoiseContext,
) -> Result<ThetaSearch, QpcaError> {
    if !(p_target > 0.0 && p_target <= 1.0) {
        return Err(PcaError::InvalidTarget(p_target).into());
    }
    if !(eps_theta > 0.0) || !(eta > 0.0) {
        return Err(QpcaError::InvalidRequest("eps_theta and eta must be positive".into()));
    }
    if exact.total_variance <= 0.0 {
        return Err(PcaError::Unreachable.into());
    }
    let est = estimated_sigmas(exact, eps_theta, gamma, ctx);
    let ratios = exact.ratios();
    let floor = exact.sigma_floor();
    let mut order: Vec<usize> = (0..exact.len())
        .filter(|&i| mode == SelectionMode::Major || exact.singular_values[i] > floor)
        .collect();
    match mode {
        SelectionMode::Major => order.sort_by(|&a, &b| est[b].total_cmp(&est[a])),
        SelectionMode::Minor => order.sort_by(|&a, &b| est[a].total_cmp(&est[b])),
    }
    if order.is_empty() {
        return Err(QpcaError::EmptySelection(mode));
    }
    let cum: Vec<f64> = order
        .iter()
        .scan(0.0, |acc, &i| {
            *acc += ratios[i];
            Some(*acc)
        })
        .collect();
    let iterations = bisection_depth(exact.singular_values[0].max(est[0]), eps_theta);

    let candidate = |taken: usize| -> ThetaSearch {
        let inner = est[order[taken - 1]];
        let theta = match (order.get(taken), mode) {
            (Some(&next), _) => 0.5 * (inner + est[next]),
            (None, SelectionMode::Major) => 0.5 * inner,
            (None, SelectionMode::Minor) => 1.5 * inner,
        };
        let mut selected = order[..taken].to_vec();
        selected.sort_unstable();
        let explained = cum[taken - 1].min(1.0);
        ThetaSearch {
            mode,
            theta,
            selected,
            explained,
            gap: (p_target - explained).abs(),
            iterations,
        }
    };

    let slack = 1e-12;
    let upper = cum
        .iter()
        .position(|&c| c + slack >= p_target)
        .map(|i| i + 1)
        .unwrap_or(order.len());
    // estimates equal to the boundary up to rounding are kept together
    let boundary = est[order[upper - 1]];
    let mut upper = upper;
    while upper < order.len() && (est[order[upper]] - boundary).abs() <= 1e-9 * boundary.abs().max(1.0) {
        upper += 1;
    }
    let reaching = candidate(upper);
    let below = (upper > 1).then(|| candidate(upper - 1));

    if reaching.gap <= eta {
        return Ok(reaching);
    }
    if let Some(b) = below.as_ref().filter(|b| b.gap <= eta) {
        return Ok(b.clone());
    }
    let nearest = match below {
        Some(b) if b.gap < reaching.gap => b,
        _ => reaching.clone(),
    };
    Err(QpcaError::NoFeasibleTheta {
        target: p_target,
        eta,
        nearest: Box::new(nearest),
        reaching: Box::new(reaching),
    })
}

/// Unit vector orthogonal to `e`, uniformly oriented in the complement.
fn orthogonal_direction(e: &[f64], rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let mut g: Vec<f64> = (0..e.len()).map(|_| rng.sample(StandardNormal)).collect();
        let proj = dot(&g, e);
        g.iter_mut().zip(e).for_each(|(gi, ei)| *gi -= proj * ei);
        if normalize(&mut g) > 1e-12 {
            return g;
        }
        if e.len() < 2 {
            return vec![0.0; e.len()];
        }
    }
}

fn perturb_vector(
    e: &[f64],
    req: &QpcaRequest,
    ctx: &mut NoiseContext,
) -> Result<(Vec<f64>, bool), QpcaError> {
    match req.vector_noise {
        VectorNoise::Bounded => {
            let rng = ctx.rng();
            let failed = req.gamma > 0.0 && rng.random::<f64>() < req.gamma;
            let mag = if failed {
                req.delta * rng.random_range(1.0..=10.0)
            } else {
                req.delta * rng.random_range(0.5..=1.0)
            };
            let dir = orthogonal_direction(e, rng);
            let mut v: Vec<f64> = e.iter().zip(&dir).map(|(a, b)| a + mag * b).collect();
            normalize(&mut v);
            Ok((v, failed))
        }
        VectorNoise::Tomography => {
            let plan = TomographyPlan::new(e.len(), req.delta, TomographyNorm::L2, req.divisor)?;
            Ok((tomography(e, &plan, ctx)?, false))
        }
    }
}

/// Builds the noisy model for the listed exact positions.
fn noisy_model(
    exact: &PcaModel,
    positions: &[usize],
    req: &QpcaRequest,
    ctx: &mut NoiseContext,
) -> Result<PcaModel, QpcaError> {
    let mut rows = Vec::with_capacity(positions.len());
    for &i in positions {
        let sigma = exact.singular_values[i];
        let lambda = exact.eigenvalues[i];
        let est = ctx.phase_with_failure(sigma, req.epsilon, req.gamma);
        let sigma_bar = est.value.max(0.0);
        let lambda_bar = (lambda + 2.0 * lambda.sqrt() * (sigma_bar - sigma)).max(0.0);
        let (e_bar, vec_failed) = perturb_vector(&exact.components[i], req, ctx)?;
        let err = ComponentError {
            index: exact.source_indices[i],
            sigma_error: (sigma_bar - sigma).abs(),
            lambda_error: (lambda_bar - lambda).abs(),
            vector_error: distance(&e_bar, &exact.components[i]),
            failed: est.failed || vec_failed,
        };
        rows.push((sigma_bar, lambda_bar, e_bar, exact.source_indices[i], err));
    }
    rows.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.3.cmp(&b.3)));
    let certificate = ErrorCertificate {
        epsilon: req.epsilon,
        delta: req.delta,
        eta: Some(req.eta),
        gamma: req.gamma,
        vector_bound_guaranteed: req.vector_noise == VectorNoise::Bounded,
        components: rows.iter().map(|r| r.4.clone()).collect(),
    };
    Ok(PcaModel {
        dim: exact.dim,
        n_samples: exact.n_samples,
        singular_values: rows.iter().map(|r| r.0).collect(),
        eigenvalues: rows.iter().map(|r| r.1).collect(),
        components: rows.iter().map(|r| r.2.clone()).collect(),
        source_indices: rows.iter().map(|r| r.3).collect(),
        rank: exact.rank,
        total_variance: exact.total_variance,
        certificate: Some(certificate),
    })
}

/// Noisy major components: those whose `ε_θ` estimate is at least `theta`.
pub fn extract_top_k(
    exact: &PcaModel,
    theta: f64,
    req: &QpcaRequest,
    ctx: &mut NoiseContext,
) -> Result<PcaModel, QpcaError> {
    req.validate()?;
    let est = estimated_sigmas(exact, req.epsilon_theta, req.gamma, ctx);
    let positions: Vec<usize> = (0..exact.len()).filter(|&i| est[i] >= theta).collect();
    if positions.is_empty() {
        return Err(QpcaError::EmptySelection(SelectionMode::Major));
    }
    noisy_model(exact, &positions, req, ctx)
}

/// Noisy minor components: non-floor components whose `ε_θ` estimate is
/// below `theta_min`.
pub fn extract_least_q(
    exact: &PcaModel,
    theta_min: f64,
    req: &QpcaRequest,
    ctx: &mut NoiseContext,
) -> Result<PcaModel, QpcaError> {
    req.validate()?;
    let floor = exact.sigma_floor();
    let est = estimated_sigmas(exact, req.epsilon_theta, req.gamma, ctx);
    let positions: Vec<usize> = (0..exact.len())
        .filter(|&i| exact.singular_values[i] > floor && est[i] < theta_min)
        .collect();
    if positions.is_empty() {
        return Err(QpcaError::EmptySelection(SelectionMode::Minor));
    }
    noisy_model(exact, &positions, req, ctx)
}

/// Major (and optionally minor) noisy models with the thresholds used.
#[derive(Debug, Clone)]
pub struct QuantumPca {
    pub major: PcaModel,
    pub theta: ThetaSearch,
    /// `true` when no threshold met `η` and the smallest set reaching the
    /// target was used instead.
    pub theta_fallback: bool,
    pub minor: Option<PcaModel>,
    pub theta_min: Option<f64>,
}

fn resolve(result: Result<ThetaSearch, QpcaError>) -> Result<(ThetaSearch, bool), QpcaError> {
    match result {
        Ok(t) => Ok((t, false)),
        Err(QpcaError::NoFeasibleTheta {
            target, eta, reaching, ..
        }) => {
            log::warn!(
                "no threshold within eta={eta} of p={target}; using the smallest set reaching it ({} components)",
                reaching.selected.len()
            );
            Ok((*reaching, true))
        }
        Err(e) => Err(e),
    }
}

/// Full extraction: threshold search, top-k, and least-q when the request
/// asks for minors.
pub fn fit_quantum_pca(
    exact: &PcaModel,
    req: &QpcaRequest,
    ctx: &mut NoiseContext,
) -> Result<QuantumPca, QpcaError> {
    req.validate()?;
    let (theta, theta_fallback) = resolve(search_with(
        exact,
        req.p_major,
        req.epsilon_theta,
        req.eta,
        req.gamma,
        SelectionMode::Major,
        ctx,
    ))?;
    let major = extract_top_k(exact, theta.theta, req, ctx)?;
    let theta_min = match (req.theta_min, req.p_minor) {
        (Some(t), _) => Some(t),
        (None, Some(p)) => {
            let eta = req.eta.min(p * 0.5);
            let (t, _) = resolve(search_with(
                exact,
                p,
                req.epsilon_theta,
                eta,
                req.gamma,
                SelectionMode::Minor,
                ctx,
            ))?;
            Some(t.theta)
        }
        (None, None) => None,
    };
    let minor = match theta_min {
        Some(t) => Some(extract_least_q(exact, t, req, ctx)?),
        None => None,
    };
    Ok(QuantumPca {
        major,
        theta,
        theta_fallback,
        minor,
        theta_min,
    })
}
