//! Synthetic intrusion-style corpus for desk-scale runs.
//!
//! Normal rows follow a latent-factor Gaussian model, so the spectrum of
//! the standardized data is controlled by a handful of factor strengths.
//! Attack rows share the structure but are inflated and shifted along a
//! random direction; a configurable fraction of them is only weakly
//! shifted so that detection is not trivial.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{DataError, Label, RawTable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub n_normal: usize,
    pub n_attack: usize,
    /// Number of informative (non-constant) features.
    pub dim: usize,
    /// Relative variances of the latent factors.
    pub factor_strengths: Vec<f64>,
    /// Fraction of each feature's variance explained by the factors.
    pub factor_share: f64,
    /// Mean shift of attacks, in units of the normal per-feature std.
    pub attack_shift: f64,
    /// Std inflation of attack rows.
    pub attack_scale: f64,
    /// Fraction of attacks whose shift is reduced to a quarter.
    pub stealth_fraction: f64,
    /// Extra constant columns appended to the table.
    #[serde(default)]
    pub constant_features: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_name() -> String {
    "synthetic".into()
}

impl SyntheticSpec {
    /// Six dominant factors over 38 features: the standardized spectrum
    /// needs six components to reach 70% explained variance.
    pub fn kdd_like(n_normal: usize, n_attack: usize, seed: u64) -> Self {
        SyntheticSpec {
            name: "synthetic-kdd".into(),
            n_normal,
            n_attack,
            dim: 38,
            factor_strengths: vec![8.0, 5.0, 4.0, 3.0, 2.5, 2.0],
            factor_share: 0.75,
            attack_shift: 2.5,
            attack_scale: 1.6,
            stealth_fraction: 0.1,
            constant_features: 2,
            seed,
        }
    }

    /// 20 informative features, four factors; used for quick end-to-end runs.
    pub fn small(n_normal: usize, n_attack: usize, seed: u64) -> Self {
        SyntheticSpec {
            name: "synthetic-small".into(),
            n_normal,
            n_attack,
            dim: 20,
            factor_strengths: vec![6.0, 4.0, 2.5, 1.5],
            factor_share: 0.7,
            attack_shift: 2.0,
            attack_scale: 1.5,
            stealth_fraction: 0.15,
            constant_features: 0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.n_normal == 0 || self.dim == 0 {
            return Err(DataError::InvalidSpec("synthetic corpus needs normal rows and features".into()));
        }
        if self.factor_strengths.is_empty() || self.factor_strengths.iter().any(|s| *s <= 0.0) {
            return Err(DataError::InvalidSpec("factor strengths must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.factor_share) {
            return Err(DataError::InvalidSpec("factor share must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.stealth_fraction) || self.attack_scale <= 0.0 {
            return Err(DataError::InvalidSpec("invalid attack parameters".into()));
        }
        Ok(())
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Generates the corpus: normal rows first, then attack rows.
pub fn generate(spec: &SyntheticSpec) -> Result<RawTable, DataError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim;
    let nf = spec.factor_strengths.len();

    // loadings: rows rescaled so every feature has unit variance
    let mut loadings = vec![vec![0.0; nf]; d];
    for row in loadings.iter_mut() {
        for (f, w) in row.iter_mut().enumerate() {
            *w = gaussian(&mut rng) * spec.factor_strengths[f].sqrt();
        }
        let norm = row.iter().map(|w| w * w).sum::<f64>().sqrt().max(1e-12);
        let target = spec.factor_share.sqrt();
        row.iter_mut().for_each(|w| *w *= target / norm);
    }
    let noise_sd = (1.0 - spec.factor_share).sqrt();
    let offsets: Vec<f64> = (0..d).map(|_| rng.random_range(-5.0..5.0)).collect();
    let scales: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0f64..2.0).exp()).collect();

    let mut direction: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
    crate::linalg::normalize(&mut direction);

    let sample = |rng: &mut ChaCha8Rng, inflate: f64, shift: f64| -> Vec<f64> {
        let factors: Vec<f64> = (0..nf).map(|_| gaussian(rng)).collect();
        let mut row: Vec<f64> = (0..d)
            .map(|j| {
                let latent: f64 = loadings[j].iter().zip(&factors).map(|(w, f)| w * f).sum();
                let z = (latent + noise_sd * gaussian(rng)) * inflate + shift * direction[j];
                offsets[j] + scales[j] * z
            })
            .collect();
        row.extend(std::iter::repeat_n(1.0, spec.constant_features));
        row
    };

    let mut rows = Vec::with_capacity(spec.n_normal + spec.n_attack);
    let mut labels = Vec::with_capacity(spec.n_normal + spec.n_attack);
    for _ in 0..spec.n_normal {
        rows.push(sample(&mut rng, 1.0, 0.0));
        labels.push(Label::Normal);
    }
    for _ in 0..spec.n_attack {
        let stealthy = rng.random::<f64>() < spec.stealth_fraction;
        let shift = if stealthy {
            0.25 * spec.attack_shift
        } else {
            spec.attack_shift
        };
        rows.push(sample(&mut rng, spec.attack_scale, shift));
        labels.push(Label::Attack);
    }
    let mut names: Vec<String> = (0..d).map(|j| format!("f{j:02}")).collect();
    names.extend((0..spec.constant_features).map(|j| format!("const{j}")));
    RawTable::new(spec.name.clone(), names, rows, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_shaped() {
        let spec = SyntheticSpec::kdd_like(100, 20, 7);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.n_rows(), 120);
        assert_eq!(a.n_features(), 40);
        assert_eq!(a.constant_columns(), vec![38, 39]);
    }

    #[test]
    fn rejects_bad_spec() {
        let mut spec = SyntheticSpec::small(10, 0, 0);
        spec.factor_share = 1.5;
        assert!(generate(&spec).is_err());
    }
}
