use nalgebra::DMatrix;
use proptest::prelude::*;
use qids::pca::{fit_matrix, project_reconstruct, select_by_threshold, select_for_variance, SelectionMode};

/// Cyclic Jacobi eigenvalues of a symmetric matrix, descending.
fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut a = a.clone();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum();
        if off < 1e-22 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[(k, p)], a[(k, q)]);
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[(p, k)], a[(q, k)]);
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| y.total_cmp(x));
    ev
}

fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.transpose() * x
}

fn matrix_strategy(max_rows: usize, max_cols: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (2..=max_rows, 1..=max_cols).prop_flat_map(|(n, d)| {
        prop::collection::vec(-5.0f64..5.0, n * d).prop_map(move |v| DMatrix::from_row_slice(n, d, &v))
    })
}

#[test]
fn eigenvalues_match_jacobi_on_fixed_matrix() {
    let x = DMatrix::from_fn(50, 20, |i, j| ((i * 7 + j * 13) % 11) as f64 - 5.0 + 0.1 * (i as f64 * j as f64).sin());
    let model = fit_matrix(&x).unwrap();
    let oracle = jacobi_eigenvalues(&gram(&x));
    let top = oracle[0];
    for (a, b) in model.eigenvalues.iter().zip(&oracle) {
        assert!((a - b).abs() <= 1e-6 * top, "{a} vs {b}");
    }
}

#[test]
fn eigenvalues_are_of_gram_not_covariance() {
    // two rows ±(3, 0): XᵀX = diag(18, 0)
    let x = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, -3.0, 0.0]);
    let m = fit_matrix(&x).unwrap();
    assert!((m.eigenvalues[0] - 18.0).abs() < 1e-12);
    assert!((m.singular_values[0] - 18f64.sqrt()).abs() < 1e-12);
}

#[test]
fn selection_on_known_spectrum() {
    let m = qids::pca::model_from_eigenvalues(&[50.0, 25.0, 15.0, 6.0, 3.0, 1.0]);
    // ratios .50 .25 .15 .06 .03 .01
    let s = select_for_variance(&m, 0.70, SelectionMode::Major).unwrap();
    assert_eq!(s.indices, vec![0, 1]);
    assert!((s.explained - 0.75).abs() < 1e-12);
    assert!((s.threshold - 0.5 * (25f64.sqrt() + 15f64.sqrt())).abs() < 1e-12);
    let s = select_for_variance(&m, 0.04, SelectionMode::Minor).unwrap();
    assert_eq!(s.indices, vec![4, 5]);
    assert!((s.threshold - 0.5 * (3f64.sqrt() + 6f64.sqrt())).abs() < 1e-12);
}

#[test]
fn tied_boundary_is_included() {
    let m = qids::pca::model_from_eigenvalues(&[4.0, 2.0, 2.0, 2.0]);
    let s = select_for_variance(&m, 0.5, SelectionMode::Major).unwrap();
    assert_eq!(s.indices, vec![0, 1, 2, 3]);
}

#[test]
fn minor_pool_skips_numerical_zeros() {
    let x = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 2.0, 2.0, 1.0, -1.0, -1.0, 3.0]);
    let m = fit_matrix(&x).unwrap();
    assert_eq!(m.rank, 2);
    let s = select_by_threshold(&m, 1e9, SelectionMode::Minor);
    assert_eq!(s.indices, vec![0, 1]);
}

#[test]
fn model_round_trips_through_file() {
    let x = DMatrix::from_fn(10, 3, |i, j| (i + 2 * j) as f64 * if i % 2 == 0 { 1.0 } else { -0.5 });
    let m = fit_matrix(&x).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    m.save(&path).unwrap();
    assert_eq!(qids::pca::PcaModel::load(&path).unwrap(), m);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn components_orthonormal_and_ordered(x in matrix_strategy(30, 8)) {
        let m = fit_matrix(&x).unwrap();
        for i in 0..m.len() {
            for j in 0..m.len() {
                let dot: f64 = m.components[i].iter().zip(&m.components[j]).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                prop_assert!((dot - expect).abs() <= 1e-8);
            }
        }
        for w in m.eigenvalues.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        prop_assert!(m.eigenvalues.iter().all(|l| *l >= 0.0));
        if m.total_variance > 0.0 {
            prop_assert!((m.ratios().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn components_are_eigenvectors_of_gram(x in matrix_strategy(20, 6)) {
        let m = fit_matrix(&x).unwrap();
        let g = gram(&x);
        let l1 = m.eigenvalues[0].max(1e-300);
        for (e, l) in m.components.iter().zip(&m.eigenvalues) {
            let v = nalgebra::DVector::from_column_slice(e);
            let r = &g * &v - &v * *l;
            prop_assert!(r.amax() <= 1e-6 * l1);
        }
    }

    #[test]
    fn canonical_sign_holds(x in matrix_strategy(20, 6)) {
        let m = fit_matrix(&x).unwrap();
        for e in &m.components {
            let pivot = e.iter().copied().fold(0.0f64, |b, v| if v.abs() > b.abs() { v } else { b });
            prop_assert!(pivot >= 0.0);
        }
    }

    #[test]
    fn eigenvalues_agree_with_jacobi(x in matrix_strategy(50, 20)) {
        let m = fit_matrix(&x).unwrap();
        let oracle = jacobi_eigenvalues(&gram(&x));
        let top = oracle[0].abs().max(1e-12);
        for (a, b) in m.eigenvalues.iter().zip(&oracle) {
            prop_assert!((a - b).abs() <= 1e-6 * top, "{} vs {}", a, b);
        }
    }

    #[test]
    fn pythagoras_and_full_rank_reconstruction(
        x in matrix_strategy(25, 5),
        z in prop::collection::vec(-3.0f64..3.0, 5),
    ) {
        let m = fit_matrix(&x).unwrap();
        let z = &z[..m.dim];
        let full = project_reconstruct(z, &m, m.len()).unwrap();
        let zz: f64 = z.iter().map(|v| v * v).sum();
        let proj: f64 = full.projection.iter().map(|v| v * v).sum();
        prop_assert!((zz - proj - full.sse).abs() <= 1e-8 * zz.max(1.0));
        if m.len() == m.dim {
            prop_assert!(full.sse <= 1e-8 * zz.max(1e-12));
        }
        for k in 0..m.len() {
            let a = project_reconstruct(z, &m, k).unwrap().sse;
            let b = project_reconstruct(z, &m, k + 1).unwrap().sse;
            prop_assert!(b <= a + 1e-9);
        }
    }

    #[test]
    fn k_non_decreasing_in_target(
        spectrum in prop::collection::vec(0.01f64..100.0, 2..12),
        p1 in 0.01f64..1.0,
        p2 in 0.01f64..1.0,
    ) {
        let mut s = spectrum;
        s.sort_by(|a, b| b.total_cmp(a));
        let m = qids::pca::model_from_eigenvalues(&s);
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let a = select_for_variance(&m, lo, SelectionMode::Major).unwrap();
        let b = select_for_variance(&m, hi, SelectionMode::Major).unwrap();
        prop_assert!(a.count() <= b.count());
        prop_assert!(a.explained + 1e-12 >= lo);
    }

    #[test]
    fn selection_is_minimal_and_threshold_consistent(
        spectrum in prop::collection::vec(0.01f64..100.0, 2..12),
        p in 0.01f64..1.0,
    ) {
        let mut s = spectrum;
        s.sort_by(|a, b| b.total_cmp(a));
        let m = qids::pca::model_from_eigenvalues(&s);
        let sel = select_for_variance(&m, p, SelectionMode::Major).unwrap();
        let ratios = m.ratios();
        // dropping the last retained block falls short of p
        let k = sel.count();
        let boundary = m.singular_values[k - 1];
        let shorter: f64 = (0..k).filter(|&i| m.singular_values[i] > boundary * (1.0 + 1e-12)).map(|i| ratios[i]).sum();
        prop_assert!(shorter < p + 1e-12 || shorter + 1e-12 < sel.explained);
        // S = {i : σ_i > θ}
        let by_theta = select_by_threshold(&m, sel.threshold, SelectionMode::Major);
        prop_assert_eq!(by_theta.indices, sel.indices);
    }
}
