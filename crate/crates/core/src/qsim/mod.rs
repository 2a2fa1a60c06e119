//! Classical simulators for the quantum subroutines: consistent phase
//! estimation, amplitude estimation, distance/inner-product estimation and
//! pure-state tomography.
//!
//! Each simulator returns the exact quantity plus an error that respects
//! the routine's guarantee, except on failure events (probability set on the
//! [`NoiseContext`]) where the error lands in a band up to `blowup` times
//! the bound.

mod amplitude;
mod context;
mod tomography;

use thiserror::Error;

pub use amplitude::amplitude_bound;
pub use context::{bounded_error, value_key, NoiseContext, DEFAULT_BLOWUP};
pub use tomography::{
    budget_sweep, error_distribution, required_samples, tomography, tomography_study, ErrorSummary,
    StudyRow, TomographyNorm, TomographyPlan, MAX_SAMPLES,
};

use crate::linalg::{dot, sq_distance};

#[derive(Debug, Error)]
pub enum QsimError {
    #[error("input outside the routine's domain: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("cannot run tomography on a zero vector")]
    ZeroVector,
    #[error("tomography input has norm {0}, expected 1")]
    NotUnit(f64),
}

const PHASE: &str = "phase";

/// Result of a bounded-error estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub failed: bool,
}

impl NoiseContext {
    /// Consistent phase estimation of `value` to precision `eps`.
    ///
    /// The error is uniform in `(-eps, eps)`, keyed by the value rounded to
    /// 12 significant digits and by `eps`, so repeated calls agree.
    pub fn phase(&mut self, value: f64, eps: f64) -> Estimate {
        let gamma = self.failure_prob();
        self.phase_with_failure(value, eps, gamma)
    }

    /// As [`NoiseContext::phase`] with an explicit failure probability.
    pub fn phase_with_failure(&mut self, value: f64, eps: f64, gamma: f64) -> Estimate {
        let blowup = self.blowup();
        let key = format!("{}|{}|{}", value_key(value), value_key(eps), value_key(gamma));
        let err = self.keyed(PHASE, key, |rng| bounded_error(rng, eps, gamma, blowup).0);
        Estimate {
            value: value + err,
            error: err,
            failed: err.abs() >= eps,
        }
    }
}

/// Consistent phase estimate of `true_value` with additive error `< eps`
/// (outside the bound only on a failure event).
pub fn phase_estimate(true_value: f64, eps: f64, ctx: &mut NoiseContext) -> Result<f64, QsimError> {
    if !(eps > 0.0) || !true_value.is_finite() {
        return Err(QsimError::Domain(format!(
            "phase estimation needs eps > 0 and a finite value (eps={eps}, value={true_value})"
        )));
    }
    Ok(ctx.phase(true_value, eps).value)
}

/// Amplitude estimation with `t` oracle calls. The outcome is drawn from
/// the exact distribution of the measured phase register, so `a = 0`
/// always yields 0 and `a = 1` with even `t` always yields 1.
pub fn estimate_amplitude(a: f64, t: u64, ctx: &mut NoiseContext) -> Result<f64, QsimError> {
    if !(0.0..=1.0).contains(&a) {
        return Err(QsimError::Domain(format!("amplitude {a} outside [0, 1]")));
    }
    if t == 0 {
        return Err(QsimError::Domain("amplitude estimation needs t >= 1".into()));
    }
    Ok(amplitude::sample(a, t, ctx.rng()))
}

/// Parameters of the distance / inner-product estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceNoise {
    pub eps: f64,
    /// Failure probability is `2Δ`.
    pub delta_fail: f64,
    pub blowup: f64,
}

impl DistanceNoise {
    pub fn new(eps: f64, delta_fail: f64) -> Result<Self, QsimError> {
        if !(eps > 0.0) {
            return Err(QsimError::Domain(format!("distance error {eps} must be positive")));
        }
        if !(delta_fail > 0.0 && delta_fail < 0.5) {
            return Err(QsimError::Domain(format!("Δ = {delta_fail} must lie in (0, 0.5)")));
        }
        Ok(DistanceNoise {
            eps,
            delta_fail,
            blowup: DEFAULT_BLOWUP,
        })
    }

    /// Noisy squared distance given the exact one, clamped at zero.
    pub fn perturb_sq_distance(&self, exact: f64, rng: &mut impl rand::Rng) -> f64 {
        let (err, _) = bounded_error(rng, self.eps, 2.0 * self.delta_fail, self.blowup);
        (exact + err).max(0.0)
    }

    pub fn perturb(&self, exact: f64, rng: &mut impl rand::Rng) -> f64 {
        exact + bounded_error(rng, self.eps, 2.0 * self.delta_fail, self.blowup).0
    }
}

fn check_dims(v: &[f64], c: &[f64]) -> Result<(), QsimError> {
    if v.len() != c.len() {
        return Err(QsimError::DimensionMismatch {
            expected: v.len(),
            got: c.len(),
        });
    }
    Ok(())
}

/// Squared distance `‖v − c‖²` with additive error `≤ eps` with
/// probability at least `1 − 2Δ`. The estimate is never negative.
pub fn estimate_sq_distance(
    v: &[f64],
    c: &[f64],
    eps: f64,
    delta_fail: f64,
    ctx: &mut NoiseContext,
) -> Result<f64, QsimError> {
    check_dims(v, c)?;
    let noise = DistanceNoise::new(eps, delta_fail)?.with_blowup(ctx.blowup());
    Ok(noise.perturb_sq_distance(sq_distance(v, c), ctx.rng()))
}

/// Inner product `⟨v, c⟩` with the same error model as
/// [`estimate_sq_distance`].
pub fn estimate_inner_product(
    v: &[f64],
    c: &[f64],
    eps: f64,
    delta_fail: f64,
    ctx: &mut NoiseContext,
) -> Result<f64, QsimError> {
    check_dims(v, c)?;
    let noise = DistanceNoise::new(eps, delta_fail)?.with_blowup(ctx.blowup());
    Ok(noise.perturb(dot(v, c), ctx.rng()))
}

impl DistanceNoise {
    pub fn with_blowup(mut self, blowup: f64) -> Self {
        self.blowup = blowup.max(1.0);
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_is_consistent() {
        let mut ctx = NoiseContext::new(11);
        let a = phase_estimate(5.0, 1.0, &mut ctx).unwrap();
        let b = phase_estimate(5.0, 1.0, &mut ctx).unwrap();
        assert_eq!(a, b);
        assert!(a > 4.0 && a < 6.0);
        assert!(phase_estimate(5.0, 0.0, &mut ctx).is_err());
    }

    #[test]
    fn phase_zero_noise_limit() {
        let mut ctx = NoiseContext::new(1);
        let v = phase_estimate(3.25, 1e-15, &mut ctx).unwrap();
        assert!((v - 3.25).abs() < 1e-14);
    }

    #[test]
    fn coincident_points() {
        let mut ctx = NoiseContext::new(2);
        let v = [0.3, -0.2, 0.9];
        for _ in 0..1000 {
            let d = estimate_sq_distance(&v, &v, 0.01, 1e-9, &mut ctx).unwrap();
            assert!((0.0..=0.01).contains(&d));
        }
        assert!(estimate_sq_distance(&v, &v[..2], 0.01, 0.1, &mut ctx).is_err());
        assert!(estimate_sq_distance(&v, &v, 0.01, 0.5, &mut ctx).is_err());
    }

    #[test]
    fn amplitude_domain() {
        let mut ctx = NoiseContext::new(0);
        assert!(estimate_amplitude(1.5, 10, &mut ctx).is_err());
        assert!(estimate_amplitude(0.5, 0, &mut ctx).is_err());
    }
}
