use rand::Rng;

/// Above this many evaluations the outcome distribution is only computed
/// in a window around the two peaks.
const EXACT_LIMIT: u64 = 1 << 14;
const WINDOW: i64 = 1024;

/// Fejér-kernel weight `sin²(tπΔ) / (t² sin²(πΔ))`, exactly 1 when Δ is
/// an integer and exactly 0 when `tΔ` is a non-zero-mod-1 integer.
fn kernel(t: f64, delta: f64) -> f64 {
    let td = t * delta;
    if (td - td.round()).abs() < 1e-9 {
        return if (delta - delta.round()).abs() < 1e-12 { 1.0 } else { 0.0 };
    }
    let num = (std::f64::consts::PI * td).sin();
    let den = t * (std::f64::consts::PI * delta).sin();
    (num * num) / (den * den)
}

/// Probability of measuring outcome `y` out of `t` when the phase is ±ω.
fn outcome_prob(t: u64, y: i64, omega: f64) -> f64 {
    let tf = t as f64;
    let yf = y as f64 / tf;
    0.5 * (kernel(tf, yf - omega) + kernel(tf, yf + omega))
}

/// Draws one amplitude-estimation outcome for amplitude `a` and `t`
/// oracle calls, by sampling the measured register from its exact
/// distribution and returning `sin²(πy/t)`.
pub(crate) fn sample(a: f64, t: u64, rng: &mut impl Rng) -> f64 {
    let omega = a.sqrt().asin() / std::f64::consts::PI;
    let candidates: Vec<i64> = if t <= EXACT_LIMIT {
        (0..t as i64).collect()
    } else {
        let tf = t as f64;
        let mut ys: Vec<i64> = Vec::new();
        for centre in [omega * tf, (1.0 - omega) * tf] {
            let c = centre.round() as i64;
            ys.extend((c - WINDOW..=c + WINDOW).map(|y| y.rem_euclid(t as i64)));
        }
        ys.sort_unstable();
        ys.dedup();
        ys
    };
    let weights: Vec<f64> = candidates.iter().map(|&y| outcome_prob(t, y, omega)).collect();
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    let mut chosen = *candidates.last().unwrap();
    for (y, w) in candidates.iter().zip(&weights) {
        if *w <= 0.0 {
            continue;
        }
        if u < *w {
            chosen = *y;
            break;
        }
        u -= w;
    }
    let s = (std::f64::consts::PI * chosen as f64 / t as f64).sin();
    (s * s).clamp(0.0, 1.0)
}

/// `2π√(a(1−a))/t + π²/t²`.
pub fn amplitude_bound(a: f64, t: u64) -> f64 {
    let t = t as f64;
    let pi = std::f64::consts::PI;
    2.0 * pi * (a * (1.0 - a)).sqrt() / t + pi * pi / (t * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distribution_sums_to_one() {
        for &(a, t) in &[(0.3, 10u64), (0.9, 64), (0.5, 7)] {
            let omega = f64::sqrt(a).asin() / std::f64::consts::PI;
            let s: f64 = (0..t as i64).map(|y| outcome_prob(t, y, omega)).sum();
            assert!((s - 1.0).abs() < 1e-9, "a={a} t={t} sum={s}");
        }
    }

    #[test]
    fn bound_value() {
        let b = amplitude_bound(0.5, 100);
        assert!((b - 0.0324).abs() < 1e-4);
    }
}
