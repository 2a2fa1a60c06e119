use rand::Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{NoiseContext, QsimError};
use crate::linalg::{quantile_sorted, sorted};

/// Budgets are capped so they stay exactly representable as `f64`.
pub const MAX_SAMPLES: u64 = 1 << 53;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TomographyNorm {
    L2,
    LInf,
}

/// Sample budget for one tomography run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyPlan {
    pub dim: usize,
    pub delta: f64,
    pub norm: TomographyNorm,
    /// Budget before the heuristic division.
    pub samples: u64,
    /// Heuristic divisor `h ≥ 1` applied to the budget.
    pub divisor: f64,
}

/// Uncapped sample bound: `36·d·ln d/δ²` for ℓ2, `36·ln d/δ²` for ℓ∞.
pub fn required_samples(dim: usize, delta: f64, norm: TomographyNorm) -> f64 {
    let d = dim as f64;
    let ln_d = d.ln().max(0.0);
    let n = match norm {
        TomographyNorm::L2 => 36.0 * d * ln_d / (delta * delta),
        TomographyNorm::LInf => 36.0 * ln_d / (delta * delta),
    };
    n.ceil()
}

impl TomographyPlan {
    pub fn new(dim: usize, delta: f64, norm: TomographyNorm, divisor: f64) -> Result<Self, QsimError> {
        if dim == 0 {
            return Err(QsimError::Domain("tomography dimension must be positive".into()));
        }
        if !(delta > 0.0) {
            return Err(QsimError::Domain(format!("tomography error {delta} must be positive")));
        }
        if !(divisor >= 1.0) {
            return Err(QsimError::Domain(format!("heuristic divisor {divisor} must be >= 1")));
        }
        let n = required_samples(dim, delta, norm);
        let samples = if n >= MAX_SAMPLES as f64 {
            log::warn!("tomography budget {n:.3e} capped at 2^53 samples");
            MAX_SAMPLES
        } else {
            n as u64
        };
        Ok(TomographyPlan {
            dim,
            delta,
            norm,
            samples,
            divisor,
        })
    }

    /// Plan with an explicit budget, bypassing the δ bound.
    pub fn with_budget(dim: usize, samples: u64) -> Self {
        TomographyPlan {
            dim,
            delta: f64::NAN,
            norm: TomographyNorm::L2,
            samples: samples.clamp(1, MAX_SAMPLES),
            divisor: 1.0,
        }
    }

    /// `⌈N/h⌉`, at least 1.
    pub fn effective_samples(&self) -> u64 {
        ((self.samples as f64 / self.divisor).ceil() as u64).max(1)
    }
}

/// Multinomial draw of `n` samples over probabilities `p`, as a chain of
/// conditional binomials so the cost is independent of `n`.
fn multinomial(n: u64, p: &[f64], rng: &mut impl Rng) -> Vec<u64> {
    let mut counts = vec![0u64; p.len()];
    let mut left = n;
    let mut mass: f64 = p.iter().sum();
    for (i, &pi) in p.iter().enumerate() {
        if left == 0 || mass <= 0.0 {
            break;
        }
        let q = (pi / mass).clamp(0.0, 1.0);
        let c = if q >= 1.0 {
            left
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        counts[i] = c;
        left -= c;
        mass -= pi;
    }
    counts
}

fn check_unit(x: &[f64]) -> Result<(), QsimError> {
    let n = crate::linalg::norm(x);
    if n == 0.0 || x.is_empty() {
        return Err(QsimError::ZeroVector);
    }
    if (n - 1.0).abs() > 1e-9 {
        return Err(QsimError::NotUnit(n));
    }
    Ok(())
}

/// Core sampler. Half the budget estimates magnitudes from computational
/// basis counts; the other half drives the sign round, where each sign
/// flips with probability `clamp(½ − |xᵢ|·√s/4, 0, ½)`.
pub(crate) fn sample_estimate(x: &[f64], total: u64, rng: &mut impl Rng) -> Vec<f64> {
    let mag_budget = total.div_ceil(2).max(1);
    let sign_budget = total - mag_budget.min(total);
    let probs: Vec<f64> = x.iter().map(|v| v * v).collect();
    let counts = multinomial(mag_budget, &probs, rng);
    let root_s = (sign_budget as f64).sqrt();
    let mut est: Vec<f64> = x
        .iter()
        .zip(&counts)
        .map(|(&xi, &c)| {
            let mag = (c as f64 / mag_budget as f64).sqrt();
            if mag == 0.0 {
                return 0.0;
            }
            let flip = (0.5 - xi.abs() * root_s / 4.0).clamp(0.0, 0.5);
            let sign = if xi < 0.0 { -1.0 } else { 1.0 };
            if flip > 0.0 && rng.random::<f64>() < flip {
                -sign * mag
            } else {
                sign * mag
            }
        })
        .collect();
    crate::linalg::normalize(&mut est);
    est
}

/// Simulated pure-state tomography of the unit vector `x`.
pub fn tomography(x: &[f64], plan: &TomographyPlan, ctx: &mut NoiseContext) -> Result<Vec<f64>, QsimError> {
    check_unit(x)?;
    if x.len() != plan.dim {
        return Err(QsimError::DimensionMismatch {
            expected: plan.dim,
            got: x.len(),
        });
    }
    let total = plan.effective_samples();
    if (total as usize) < x.len() {
        log::warn!(
            "tomography budget {total} is below the vector dimension {}",
            x.len()
        );
    }
    Ok(sample_estimate(x, total, ctx.rng()))
}

fn error_of(x: &[f64], est: &[f64], norm: TomographyNorm) -> f64 {
    match norm {
        TomographyNorm::L2 => crate::linalg::distance(x, est),
        TomographyNorm::LInf => x
            .iter()
            .zip(est)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max),
    }
}

/// Errors of `repetitions` independent runs at a fixed budget.
pub fn error_distribution(
    x: &[f64],
    samples: u64,
    repetitions: usize,
    norm: TomographyNorm,
    ctx: &NoiseContext,
) -> Result<Vec<f64>, QsimError> {
    check_unit(x)?;
    let samples = samples.clamp(1, MAX_SAMPLES);
    Ok((0..repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut rng = ctx.derive_rng("tomography", &format!("{samples}:{rep}"));
            let est = sample_estimate(x, samples, &mut rng);
            error_of(x, &est, norm)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub samples: u64,
    pub median: f64,
    pub p05: f64,
    pub p95: f64,
}

impl ErrorSummary {
    fn from_errors(samples: u64, errors: &[f64]) -> Self {
        let s = sorted(errors);
        ErrorSummary {
            samples,
            median: quantile_sorted(&s, 0.5),
            p05: quantile_sorted(&s, 0.05),
            p95: quantile_sorted(&s, 0.95),
        }
    }
}

/// One row of the δ-grid study: the theoretical budget for δ, the
/// budget actually used (after the divisor) and the observed errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub delta: f64,
    pub theoretical_samples: f64,
    pub summary: ErrorSummary,
}

/// Empirical error against budget over a δ grid.
pub fn tomography_study(
    x: &[f64],
    deltas: &[f64],
    repetitions: usize,
    divisor: f64,
    norm: TomographyNorm,
    ctx: &NoiseContext,
) -> Result<Vec<StudyRow>, QsimError> {
    if repetitions == 0 {
        return Err(QsimError::Domain("at least one repetition required".into()));
    }
    deltas
        .iter()
        .map(|&delta| {
            let plan = TomographyPlan::new(x.len(), delta, norm, divisor)?;
            let samples = plan.effective_samples();
            let errors = error_distribution(x, samples, repetitions, norm, ctx)?;
            Ok(StudyRow {
                delta,
                theoretical_samples: required_samples(x.len(), delta, norm),
                summary: ErrorSummary::from_errors(samples, &errors),
            })
        })
        .collect()
}

/// Empirical error at explicit budgets.
pub fn budget_sweep(
    x: &[f64],
    budgets: &[u64],
    repetitions: usize,
    norm: TomographyNorm,
    ctx: &NoiseContext,
) -> Result<Vec<ErrorSummary>, QsimError> {
    budgets
        .iter()
        .map(|&s| {
            let errors = error_distribution(x, s, repetitions, norm, ctx)?;
            Ok(ErrorSummary::from_errors(s, &errors))
        })
        .collect()
}
