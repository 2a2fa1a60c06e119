use nalgebra::DMatrix;
use proptest::prelude::*;
use qids::data::{generate, preprocess, SplitSpec, SyntheticSpec};
use qids::pca::{fit_exact_pca, fit_matrix, model_from_eigenvalues, select_for_variance, PcaModel, SelectionMode};
use qids::qpca::{
    extract_least_q, extract_top_k, fit_quantum_pca, quantum_binary_search_theta, QpcaError, QpcaRequest,
    VectorNoise,
};
use qids::qsim::NoiseContext;

fn kdd_exact() -> PcaModel {
    let table = generate(&SyntheticSpec::kdd_like(12000, 500, 21)).unwrap();
    let data = preprocess(&table, &SplitSpec::new(5000, (200, 100), (100, 100))).unwrap();
    fit_exact_pca(&data.train).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn spectrum_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.5f64..400.0, 3..12).prop_map(|mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    })
}

#[test]
fn zero_noise_reproduces_exact_model() {
    let x = DMatrix::from_fn(60, 6, |i, j| ((i * 31 + j * 17) % 23) as f64 / 7.0 - 1.5 + (j as f64) * 0.01 * i as f64);
    let exact = fit_matrix(&x).unwrap();
    let sel = select_for_variance(&exact, 0.7, SelectionMode::Major).unwrap();
    let q = fit_quantum_pca(&exact, &QpcaRequest::zero_noise(0.7), &mut NoiseContext::new(4)).unwrap();
    assert_eq!(q.theta.selected, sel.indices);
    assert_eq!(q.major.source_indices, sel.indices);
    for (pos, &i) in sel.indices.iter().enumerate() {
        assert!((q.major.singular_values[pos] - exact.singular_values[i]).abs() <= 1e-8);
        assert!((q.major.eigenvalues[pos] - exact.eigenvalues[i]).abs() <= 1e-8 * exact.eigenvalues[0]);
        assert!(dist(&q.major.components[pos], &exact.components[i]) <= 1e-8);
    }
}

#[test]
fn component_count_stable_at_paper_settings() {
    let exact = kdd_exact();
    let classical = select_for_variance(&exact, 0.70, SelectionMode::Major).unwrap().count();
    let mut req = QpcaRequest::new(0.70, 1.0, 1.0, 0.1, 0.1);
    req.gamma = 1.0 / exact.dim as f64;
    for seed in 0..20 {
        let mut ctx = NoiseContext::new(seed).with_failure_prob(req.gamma);
        let q = fit_quantum_pca(&exact, &req, &mut ctx).unwrap();
        let k = q.major.len() as i64;
        assert!((k - classical as i64).abs() <= 1, "seed {seed}: k = {k} vs {classical}");
    }
}

#[test]
fn infeasible_target_falls_back_to_reaching_set() {
    let m = model_from_eigenvalues(&[4.0, 3.0, 2.0, 1.0]);
    let req = QpcaRequest::new(0.5, 1e-9, 1e-9, 0.01, 0.1);
    let q = fit_quantum_pca(&m, &req, &mut NoiseContext::new(0)).unwrap();
    assert!(q.theta_fallback);
    assert_eq!(q.theta.selected, vec![0, 1]);
}

#[test]
fn minor_extraction_by_variance_share() {
    let m = model_from_eigenvalues(&[60.0, 25.0, 10.0, 4.0, 1.0]);
    let mut req = QpcaRequest::zero_noise(0.6);
    req.p_minor = Some(0.05);
    let q = fit_quantum_pca(&m, &req, &mut NoiseContext::new(3)).unwrap();
    let minor = q.minor.unwrap();
    assert_eq!(minor.source_indices, vec![3, 4]);
    assert!(q.theta_min.unwrap() > 2.0 && q.theta_min.unwrap() < 10f64.sqrt());
}

#[test]
fn sampled_vectors_flag_certificate_as_empirical() {
    let m = model_from_eigenvalues(&[9.0, 4.0, 1.0]);
    let mut req = QpcaRequest::new(0.5, 0.1, 0.1, 0.2, 0.1);
    req.vector_noise = VectorNoise::Tomography;
    let noisy = extract_top_k(&m, 2.5, &req, &mut NoiseContext::new(1)).unwrap();
    let cert = noisy.certificate.unwrap();
    assert!(!cert.vector_bound_guaranteed);
    for e in &noisy.components {
        assert!((e.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn empty_selections_are_errors() {
    let m = model_from_eigenvalues(&[9.0, 4.0, 1.0]);
    let req = QpcaRequest::zero_noise(0.5);
    assert!(matches!(
        extract_top_k(&m, 100.0, &req, &mut NoiseContext::new(0)),
        Err(QpcaError::EmptySelection(SelectionMode::Major))
    ));
    assert!(matches!(
        extract_least_q(&m, 0.1, &req, &mut NoiseContext::new(0)),
        Err(QpcaError::EmptySelection(SelectionMode::Minor))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn certificates_are_sound(
        spectrum in spectrum_strategy(),
        eps in 0.01f64..2.0,
        delta in 0.01f64..0.5,
        seed in 0u64..500,
    ) {
        let m = model_from_eigenvalues(&spectrum);
        let req = QpcaRequest::new(0.5, eps, eps, 0.2, delta);
        let noisy = extract_top_k(&m, 0.0, &req, &mut NoiseContext::new(seed)).unwrap();
        let cert = noisy.certificate.as_ref().unwrap();
        prop_assert!(cert.is_sound(&m));
        for c in &cert.components {
            let pos = noisy.source_indices.iter().position(|&i| i == c.index).unwrap();
            let actual = dist(&noisy.components[pos], &m.components[c.index]);
            prop_assert!((actual - c.vector_error).abs() < 1e-12);
            prop_assert!(c.vector_error <= delta + 1e-12);
            prop_assert!(c.sigma_error < eps);
            prop_assert!(c.lambda_error <= 2.0 * eps * m.eigenvalues[c.index].sqrt() + 1e-9);
        }
    }

    #[test]
    fn failed_components_are_flagged(spectrum in spectrum_strategy(), seed in 0u64..200) {
        let m = model_from_eigenvalues(&spectrum);
        let mut req = QpcaRequest::new(0.5, 0.5, 0.5, 0.2, 0.1);
        req.gamma = 0.5;
        let noisy = extract_top_k(&m, 0.0, &req, &mut NoiseContext::new(seed).with_failure_prob(0.5)).unwrap();
        let cert = noisy.certificate.unwrap();
        for c in &cert.components {
            if c.sigma_error >= 0.5 || c.vector_error > 0.1 + 1e-12 {
                prop_assert!(c.failed);
            }
        }
    }

    #[test]
    fn shrinking_eta_never_widens_gap(
        spectrum in spectrum_strategy(),
        p in 0.2f64..0.95,
        eta_big in 0.02f64..0.19,
        shrink in 0.05f64..1.0,
        seed in 0u64..100,
    ) {
        let m = model_from_eigenvalues(&spectrum);
        let eta_small = eta_big * shrink;
        let big = quantum_binary_search_theta(&m, p, 0.5, eta_big, SelectionMode::Major, &mut NoiseContext::new(seed));
        let small = quantum_binary_search_theta(&m, p, 0.5, eta_small, SelectionMode::Major, &mut NoiseContext::new(seed));
        if let (Ok(b), Ok(s)) = (&big, &small) {
            prop_assert!(s.gap <= b.gap + 1e-15);
        }
        if let Ok(s) = &small {
            prop_assert!(s.gap <= eta_small);
        }
        if big.is_err() {
            prop_assert!(small.is_err());
        }
    }

    #[test]
    fn extraction_reselects_the_searched_set(spectrum in spectrum_strategy(), p in 0.2f64..0.95, seed in 0u64..100) {
        let m = model_from_eigenvalues(&spectrum);
        let req = QpcaRequest::new(p, 0.3, 0.3, (p / 2.0).min(0.5), 0.1);
        let mut ctx = NoiseContext::new(seed);
        let q = fit_quantum_pca(&m, &req, &mut ctx).unwrap();
        let mut got = q.major.source_indices.clone();
        got.sort_unstable();
        prop_assert_eq!(got, q.theta.selected.clone());
        let depth = (m.singular_values[0] / 0.3).log2().ceil().max(1.0) as u32;
        prop_assert!(q.theta.iterations >= depth.saturating_sub(1) && q.theta.iterations <= depth + 1);
    }
}
