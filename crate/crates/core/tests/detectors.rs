use nalgebra::DMatrix;
use proptest::prelude::*;
use qids::data::Label;
use qids::detectors::{
    calibrate_threshold, ensemble_scores, evaluate, pcc_scores, recon_score, tune_threshold, Detector, DetectorError,
    EnsembleModel, Metrics, PccModel, ReconModel,
};
use qids::pca::{fit_matrix, model_from_eigenvalues, PcaModel};

fn fitted() -> PcaModel {
    let x = DMatrix::from_fn(80, 5, |i, j| {
        let t = i as f64 * 0.37;
        (t * (j + 1) as f64).sin() * (5 - j) as f64 + 0.05 * ((i * j) % 7) as f64
    });
    fit_matrix(&x).unwrap()
}

fn rows(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            (0..5)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 6.0
                })
                .collect()
        })
        .collect()
}

fn nearest_rank(scores: &[f64], alpha: f64) -> f64 {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let mut rank = 1;
    while (rank as f64) < (1.0 - alpha) * n as f64 - 1e-9 {
        rank += 1;
    }
    s[rank.min(n) - 1]
}

fn pearson_oracle(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn f1_at(scores: &[f64], labels: &[Label], t: f64) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
    for (s, l) in scores.iter().zip(labels) {
        match (*s > t, l.is_attack()) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            _ => {}
        }
    }
    if tp == 0.0 {
        0.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fn_)
    }
}

#[test]
fn pcc_scores_match_direct_sum() {
    let m = fitted();
    let major = m.top(2);
    let minor = m.subset(&[3, 4]);
    for z in rows(20, 1) {
        let (t1, t2) = pcc_scores(&z, &major, Some(&minor)).unwrap();
        let oracle = |model: &PcaModel| -> f64 {
            (0..model.len())
                .map(|i| {
                    let y: f64 = (0..5).map(|j| model.components[i][j] * z[j]).sum();
                    y * y / model.eigenvalues[i]
                })
                .sum()
        };
        assert!((t1 - oracle(&major)).abs() <= 1e-10 * t1.max(1.0));
        assert!((t2 - oracle(&minor)).abs() <= 1e-10 * t2.max(1.0));
        assert_eq!(pcc_scores(&z, &major, None).unwrap().1, 0.0);
    }
}

#[test]
fn ensemble_scores_match_oracles() {
    let m = fitted();
    let major = m.top(2);
    for z in rows(10, 2) {
        let s = ensemble_scores(&z, &major, None).unwrap();
        assert_eq!(s.len(), 3);
        let zn = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let (mut dot, mut cos, mut cor) = (0.0, 0.0, 0.0);
        for (e, l) in major.components.iter().zip(&major.eigenvalues) {
            let d: f64 = e.iter().zip(&z).map(|(a, b)| a * b).sum();
            let en = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            let r = pearson_oracle(e, &z);
            dot += d * d / l;
            cos += (d / (en * zn)).powi(2) / l;
            cor += r * r / l;
        }
        assert!((s[0] - dot).abs() <= 1e-10 * dot.max(1.0));
        assert!((s[1] - cos).abs() <= 1e-10 * cos.max(1e-3));
        assert!((s[2] - cor).abs() <= 1e-10 * cor.max(1e-3));
    }
}

#[test]
fn ensemble_rejects_degenerate_rows() {
    let m = fitted().top(2);
    assert!(matches!(ensemble_scores(&[0.0; 5], &m, None), Err(DetectorError::ZeroVector)));
    assert!(matches!(ensemble_scores(&[2.0; 5], &m, None), Err(DetectorError::ConstantVector)));
}

#[test]
fn ill_conditioned_models_are_rejected() {
    let m = model_from_eigenvalues(&[10.0, 1e-30]);
    assert!(matches!(PccModel::new(m.clone(), None), Err(DetectorError::IllConditioned { .. })));
    assert!(matches!(EnsembleModel::new(m, None), Err(DetectorError::IllConditioned { .. })));
}

#[test]
fn ensemble_flags_everything_dot_pcc_flags() {
    let m = fitted();
    let (major, minor) = (m.top(2), m.subset(&[4]));
    let normals = rows(200, 3);
    let pcc = PccModel::new(major.clone(), Some(minor.clone())).unwrap();
    let pcc = pcc.calibrated(&pcc.batch_scores(&normals).unwrap(), 0.05).unwrap();
    let ens = EnsembleModel::new(major, Some(minor)).unwrap();
    let ens = ens.calibrated(&ens.batch_scores(&normals).unwrap(), 0.05).unwrap();
    let th = ens.thresholds.as_ref().unwrap();
    assert_eq!(th[0], pcc.c1.unwrap());
    assert_eq!(th[3], pcc.c2.unwrap());
    for z in rows(500, 4) {
        if pcc.is_attack(&z).unwrap() {
            assert!(ens.is_attack(&z).unwrap());
        }
    }
}

#[test]
fn calibrated_false_alarm_rate_near_alpha() {
    let m = fitted().top(3);
    let normals = rows(1000, 5);
    let pcc = PccModel::new(m, None).unwrap();
    for alpha in [0.01, 0.05, 0.1, 0.2] {
        let cal = pcc.calibrated(&pcc.batch_scores(&normals).unwrap(), alpha).unwrap();
        let flagged = cal.predict(&normals).unwrap().iter().filter(|l| l.is_attack()).count();
        let rate = flagged as f64 / normals.len() as f64;
        assert!(rate <= alpha + 1e-12 && rate >= alpha - 0.002, "alpha {alpha}: rate {rate}");
    }
}

#[test]
fn uncalibrated_detectors_refuse_to_classify() {
    let m = fitted().top(2);
    let z = vec![1.0, 0.0, 0.0, 0.0, 0.5];
    assert!(matches!(PccModel::new(m.clone(), None).unwrap().is_attack(&z), Err(DetectorError::Uncalibrated)));
    assert!(matches!(ReconModel::new(m).unwrap().is_attack(&z), Err(DetectorError::Uncalibrated)));
}

#[test]
fn recon_score_is_residual_energy() {
    let m = fitted();
    let top = m.top(2);
    for z in rows(10, 6) {
        let mut resid = z.clone();
        for e in &top.components {
            let y: f64 = e.iter().zip(&z).map(|(a, b)| a * b).sum();
            for (r, v) in resid.iter_mut().zip(e) {
                *r -= y * v;
            }
        }
        let oracle: f64 = resid.iter().map(|v| v * v).sum();
        assert!((recon_score(&z, &top).unwrap() - oracle).abs() <= 1e-10);
    }
}

#[test]
fn metrics_match_hand_counts() {
    use Label::{Attack as A, Normal as N};
    let pred = [A, A, N, N, A, N, N, A];
    let truth = [A, N, N, A, A, N, N, A];
    let m = evaluate(&pred, &truth).unwrap();
    assert_eq!((m.tp, m.fp, m.tn, m.fn_), (3, 1, 3, 1));
    assert!((m.recall - 75.0).abs() < 1e-12);
    assert!((m.precision - 75.0).abs() < 1e-12);
    assert!((m.f1 - 75.0).abs() < 1e-12);
    assert!((m.accuracy - 75.0).abs() < 1e-12);

    let none = evaluate(&[N, N], &[A, N]).unwrap();
    assert_eq!(none.precision, 0.0);
    assert_eq!(none.f1, 0.0);
    assert!(matches!(evaluate(&[N], &[N]), Err(DetectorError::NoPositives)));
    assert!(evaluate(&[N], &[A, N]).is_err());
    assert_eq!(Metrics::from_counts(0, 0, 5, 5).accuracy, 50.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn calibration_matches_nearest_rank(
        scores in prop::collection::vec(-100.0f64..100.0, 1..300),
        alpha in 0.001f64..0.999,
    ) {
        let c = calibrate_threshold(&scores, alpha).unwrap();
        prop_assert_eq!(c, nearest_rank(&scores, alpha));
        let flagged = scores.iter().filter(|&&s| s > c).count();
        prop_assert!(flagged as f64 <= alpha * scores.len() as f64 + 1e-9);
    }

    #[test]
    fn larger_alpha_flags_a_superset(
        scores in prop::collection::vec(-10.0f64..10.0, 1..200),
        a1 in 0.001f64..0.999,
        a2 in 0.001f64..0.999,
        probe in prop::collection::vec(-12.0f64..12.0, 50),
    ) {
        let (lo, hi) = if a1 <= a2 { (a1, a2) } else { (a2, a1) };
        let c_lo = calibrate_threshold(&scores, lo).unwrap();
        let c_hi = calibrate_threshold(&scores, hi).unwrap();
        prop_assert!(c_hi <= c_lo);
        for s in probe {
            if s > c_lo {
                prop_assert!(s > c_hi);
            }
        }
    }

    #[test]
    fn tuned_threshold_is_best_f1_largest_t(
        data in prop::collection::vec((0u8..20, any::<bool>()), 2..80),
    ) {
        prop_assume!(data.iter().any(|d| d.1));
        let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 4.0).collect();
        let labels: Vec<Label> = data.iter().map(|d| if d.1 { Label::Attack } else { Label::Normal }).collect();
        let t = tune_threshold(&scores, &labels).unwrap();
        let mut best = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &c in &scores {
            let f = f1_at(&scores, &labels, c);
            if f > best.0 || (f == best.0 && c > best.1) {
                best = (f, c);
            }
        }
        prop_assert_eq!(t, best.1);
    }
}
