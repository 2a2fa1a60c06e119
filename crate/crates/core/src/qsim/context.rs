use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Default ratio between the largest and the nominal error on a failure
/// event.
pub const DEFAULT_BLOWUP: f64 = 10.0;

/// Randomness for the simulators.
///
/// Two kinds of draws are available: sequential draws from a seeded stream
/// and keyed draws, which are a pure function of `(seed, routine, key)` and
/// are cached so that a routine asked the same question twice returns the
/// same noisy answer.
#[derive(Debug, Clone)]
pub struct NoiseContext {
    seed: u64,
    failure_prob: f64,
    blowup: f64,
    store: HashMap<(&'static str, String), f64>,
    stream: ChaCha8Rng,
}

impl NoiseContext {
    pub fn new(seed: u64) -> Self {
        NoiseContext {
            seed,
            failure_prob: 0.0,
            blowup: DEFAULT_BLOWUP,
            store: HashMap::new(),
            stream: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Probability that a bounded-error routine lands outside its bound.
    pub fn with_failure_prob(mut self, gamma: f64) -> Self {
        self.failure_prob = gamma.clamp(0.0, 1.0);
        self
    }

    pub fn with_blowup(mut self, factor: f64) -> Self {
        self.blowup = factor.max(1.0);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn failure_prob(&self) -> f64 {
        self.failure_prob
    }

    pub fn blowup(&self) -> f64 {
        self.blowup
    }

    /// Sequential stream for draws that need no consistency.
    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.stream
    }

    /// Independent generator derived from `(seed, routine, key)`.
    pub fn derive_rng(&self, routine: &str, key: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(routine.as_bytes());
        h.update([0u8]);
        h.update(key.as_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest[..32]);
        ChaCha8Rng::from_seed(seed)
    }

    /// Cached keyed value: computed once per `(routine, key)` with a
    /// generator derived from the key, returned verbatim afterwards.
    pub fn keyed<F>(&mut self, routine: &'static str, key: String, draw: F) -> f64
    where
        F: FnOnce(&mut ChaCha8Rng) -> f64,
    {
        if let Some(v) = self.store.get(&(routine, key.clone())) {
            return *v;
        }
        let mut rng = self.derive_rng(routine, &key);
        let v = draw(&mut rng);
        self.store.insert((routine, key), v);
        v
    }

    pub fn cached_entries(&self) -> usize {
        self.store.len()
    }
}

/// Consistency key: the value rounded to 12 significant digits.
pub fn value_key(v: f64) -> String {
    format!("{v:.11e}")
}

/// Signed error for a bounded routine: uniform in `(-bound, bound)` on
/// success, or of magnitude uniform in `[bound, blowup·bound]` with a
/// random sign on failure. Returns `(error, failed)`.
pub fn bounded_error(rng: &mut impl Rng, bound: f64, failure_prob: f64, blowup: f64) -> (f64, bool) {
    let failed = failure_prob > 0.0 && rng.random::<f64>() < failure_prob;
    if failed {
        let mag = bound * rng.random_range(1.0..=blowup.max(1.0));
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        (sign * mag, true)
    } else {
        // open interval: reject the endpoint
        let mut u = rng.random_range(-1.0..1.0);
        while u == -1.0 {
            u = rng.random_range(-1.0..1.0);
        }
        (u * bound, false)
    }
}
