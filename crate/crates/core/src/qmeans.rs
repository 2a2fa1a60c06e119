//! q-means: Lloyd iterations whose distance estimates and centroid
//! updates carry the errors of the quantum routine, next to the classical
//! reference and the Calinski–Harabasz index used to compare them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{normalize, sq_distance};
use crate::qsim::{DistanceNoise, QsimError};

pub const MAX_ITERATIONS: usize = 300;
const CHUNK: usize = 1024;

#[derive(Debug, Error)]
pub enum ClusterError {
    #[error("k = {k} must lie in [1, n = {n}]")]
    InvalidK { k: usize, n: usize },
    #[error("invalid clustering parameter: {0}")]
    InvalidParam(String),
    #[error("rows have inconsistent dimensions")]
    DimensionMismatch,
    #[error("need at least 2 clusters for the CH index, got {0}")]
    TooFewClusters(usize),
    #[error("cluster {0} is empty")]
    EmptyCluster(usize),
    #[error(transparent)]
    Qsim(#[from] QsimError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusteringResult {
    pub centroids: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub iterations: usize,
    /// Largest centroid move per iteration, measured on the exact
    /// (pre-perturbation) updates.
    pub drift: Vec<f64>,
    /// Empty clusters re-seeded from the farthest point.
    pub reseeded: usize,
    /// Largest squared row norm of the input.
    pub max_sq_norm: f64,
}

/// Error knobs of a q-means run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QmeansParams {
    /// Centroid error.
    pub delta: f64,
    /// Additive error of each squared-distance estimate.
    pub eps_dist: f64,
    /// Distance estimates fail with probability `2Δ`.
    pub delta_fail: f64,
    pub max_iter: usize,
}

impl QmeansParams {
    pub fn new(delta: f64, eps_dist: f64) -> Self {
        QmeansParams {
            delta,
            eps_dist,
            delta_fail: 1e-3,
            max_iter: MAX_ITERATIONS,
        }
    }
}

fn check_rows(rows: &[Vec<f64>], k: usize) -> Result<usize, ClusterError> {
    if k == 0 || k > rows.len() {
        return Err(ClusterError::InvalidK { k, n: rows.len() });
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return Err(ClusterError::DimensionMismatch);
    }
    Ok(d)
}

/// k-means++ seeding.
pub fn kmeans_pp_init(rows: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Vec<f64>>, ClusterError> {
    check_rows(rows, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = vec![rows[rng.random_range(0..rows.len())].clone()];
    let mut best: Vec<f64> = rows.iter().map(|r| sq_distance(r, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = best.iter().sum();
        let next = if total <= 0.0 {
            rng.random_range(0..rows.len())
        } else {
            let mut u = rng.random::<f64>() * total;
            let mut pick = rows.len() - 1;
            for (i, w) in best.iter().enumerate() {
                if u < *w {
                    pick = i;
                    break;
                }
                u -= w;
            }
            pick
        };
        let c = rows[next].clone();
        for (b, r) in best.iter_mut().zip(rows) {
            *b = b.min(sq_distance(r, &c));
        }
        centroids.push(c);
    }
    Ok(centroids)
}

fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_distance(row, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Assignment with noisy squared distances. Only centroids whose exact
/// distance is within the largest possible error band of the minimum can
/// win, so noise is drawn for those alone.
fn noisy_nearest(row: &[f64], centroids: &[Vec<f64>], noise: &DistanceNoise, rng: &mut ChaCha8Rng) -> usize {
    let exact: Vec<f64> = centroids.iter().map(|c| sq_distance(row, c)).collect();
    let min = exact.iter().copied().fold(f64::INFINITY, f64::min);
    let band = 2.0 * noise.eps * noise.blowup;
    let mut best = (0, f64::INFINITY);
    for (j, &d) in exact.iter().enumerate() {
        if d > min + band {
            continue;
        }
        let est = noise.perturb_sq_distance(d, rng);
        if est < best.1 {
            best = (j, est);
        }
    }
    best.0
}

/// Means of the assigned rows; empty clusters are re-seeded from the row
/// farthest from its centroid.
fn update(rows: &[Vec<f64>], assignments: &[usize], prev: &[Vec<f64>], reseeded: &mut usize) -> Vec<Vec<f64>> {
    let k = prev.len();
    let d = rows[0].len();
    let (sums, counts) = rows
        .par_iter()
        .zip(assignments)
        .fold(
            || (vec![vec![0.0; d]; k], vec![0usize; k]),
            |(mut s, mut c), (r, &a)| {
                s[a].iter_mut().zip(r).for_each(|(x, y)| *x += y);
                c[a] += 1;
                (s, c)
            },
        )
        .reduce(
            || (vec![vec![0.0; d]; k], vec![0usize; k]),
            |(mut s1, mut c1), (s2, c2)| {
                for j in 0..k {
                    s1[j].iter_mut().zip(&s2[j]).for_each(|(x, y)| *x += y);
                    c1[j] += c2[j];
                }
                (s1, c1)
            },
        );
    let mut out: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .zip(prev)
        .map(|((s, &c), p)| {
            if c == 0 {
                p.clone()
            } else {
                s.into_iter().map(|x| x / c as f64).collect()
            }
        })
        .collect();
    for j in (0..k).filter(|&j| counts[j] == 0) {
        let far = rows
            .iter()
            .zip(assignments)
            .map(|(r, &a)| sq_distance(r, &prev[a]))
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        log::info!("cluster {j} empty; re-seeded from row {far}");
        out[j] = rows[far].clone();
        *reseeded += 1;
    }
    out
}

fn max_move(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| sq_distance(x, y).sqrt())
        .fold(0.0, f64::max)
}

fn max_sq_norm(rows: &[Vec<f64>]) -> f64 {
    rows.iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Classical Lloyd iterations from `init`, stopping when assignments no
/// longer change.
pub fn kmeans_fit(rows: &[Vec<f64>], init: &[Vec<f64>], max_iter: usize) -> Result<ClusteringResult, ClusterError> {
    check_rows(rows, init.len())?;
    let mut centroids = init.to_vec();
    let mut assignments: Vec<usize> = vec![usize::MAX; rows.len()];
    let mut drift = Vec::new();
    let mut reseeded = 0;
    for _ in 0..max_iter {
        let next: Vec<usize> = rows.par_iter().map(|r| nearest(r, &centroids).0).collect();
        let changed = next != assignments;
        assignments = next;
        let updated = update(rows, &assignments, &centroids, &mut reseeded);
        drift.push(max_move(&updated, &centroids));
        centroids = updated;
        if !changed {
            break;
        }
    }
    Ok(ClusteringResult {
        centroids,
        iterations: drift.len(),
        assignments,
        drift,
        reseeded,
        max_sq_norm: max_sq_norm(rows),
    })
}

/// Random vector with norm uniform in `[δ/2, δ]`.
fn centroid_noise(d: usize, delta: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    while normalize(&mut v) == 0.0 {
        v = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    }
    let mag = delta * rng.random_range(0.5..=1.0);
    v.iter_mut().for_each(|x| *x *= mag);
    v
}

/// q-means from `init`.
///
/// Each iteration assigns rows with noisy squared distances, computes the
/// exact means of those assignment sets and perturbs each by a vector of
/// norm at most `δ`. Stops once the exact means move less than `δ/2`.
/// Per-chunk generators are derived from `(seed, iteration, chunk)`, so the
/// result does not depend on the thread count.
pub fn qmeans_fit(
    rows: &[Vec<f64>],
    init: &[Vec<f64>],
    params: &QmeansParams,
    seed: u64,
) -> Result<ClusteringResult, ClusterError> {
    let d = check_rows(rows, init.len())?;
    if !(params.delta > 0.0) {
        return Err(ClusterError::InvalidParam(format!("delta {} must be positive", params.delta)));
    }
    let noise = DistanceNoise::new(params.eps_dist, params.delta_fail)?;
    let eta = max_sq_norm(rows);
    log::debug!("q-means on {} rows, max squared norm {eta:.4}", rows.len());

    let mut centroids = init.to_vec();
    let mut prev_exact: Option<Vec<Vec<f64>>> = None;
    let mut assignments = vec![0usize; rows.len()];
    let mut drift = Vec::new();
    let mut reseeded = 0;
    for iter in 0..params.max_iter {
        assignments = rows
            .par_chunks(CHUNK)
            .enumerate()
            .flat_map_iter(|(chunk, part)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(((iter as u64) << 32) | chunk as u64);
                let cs = &centroids;
                part.iter()
                    .map(|r| noisy_nearest(r, cs, &noise, &mut rng))
                    .collect::<Vec<_>>()
            })
            .collect();
        let exact = update(rows, &assignments, &centroids, &mut reseeded);
        let moved = max_move(&exact, prev_exact.as_deref().unwrap_or(&centroids));
        drift.push(moved);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(((iter as u64) << 32) | 0xffff_ffff);
        centroids = exact
            .iter()
            .map(|c| {
                let n = centroid_noise(d, params.delta, &mut rng);
                c.iter().zip(&n).map(|(a, b)| a + b).collect()
            })
            .collect();
        prev_exact = Some(exact);
        if moved < params.delta / 2.0 {
            break;
        }
    }
    Ok(ClusteringResult {
        centroids,
        iterations: drift.len(),
        assignments,
        drift,
        reseeded,
        max_sq_norm: eta,
    })
}

/// Calinski–Harabasz index of an assignment into `k` clusters, with
/// centroids recomputed from the assignment. Returns `+∞` (logged) when
/// the within-cluster dispersion is zero.
pub fn ch_index(rows: &[Vec<f64>], assignments: &[usize], k: usize) -> Result<f64, ClusterError> {
    if k < 2 {
        return Err(ClusterError::TooFewClusters(k));
    }
    let d = check_rows(rows, 1)?;
    if assignments.len() != rows.len() || assignments.iter().any(|&a| a >= k) {
        return Err(ClusterError::DimensionMismatch);
    }
    let n = rows.len();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (r, &a) in rows.iter().zip(assignments) {
        sums[a].iter_mut().zip(r).for_each(|(s, x)| *s += x);
        counts[a] += 1;
    }
    if let Some(j) = counts.iter().position(|&c| c == 0) {
        return Err(ClusterError::EmptyCluster(j));
    }
    let means: Vec<Vec<f64>> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| s.iter().map(|x| x / c as f64).collect())
        .collect();
    let mut grand = vec![0.0; d];
    for r in rows {
        grand.iter_mut().zip(r).for_each(|(g, x)| *g += x / n as f64);
    }
    let between: f64 = means
        .iter()
        .zip(&counts)
        .map(|(m, &c)| c as f64 * sq_distance(m, &grand))
        .sum();
    let within: f64 = rows
        .iter()
        .zip(assignments)
        .map(|(r, &a)| sq_distance(r, &means[a]))
        .sum();
    if within <= 0.0 || n <= k {
        log::warn!("zero within-cluster dispersion; CH index is unbounded");
        return Ok(f64::INFINITY);
    }
    Ok((between / (k - 1) as f64) / (within / (n - k) as f64))
}
