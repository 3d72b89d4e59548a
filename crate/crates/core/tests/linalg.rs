mod common;

use drom::linalg::{
    full_svd, leading_singular_triple, norm2, nuclear_norm, power_iteration,
    second_largest_abs_eigenvalue, LinalgError, Mat, PowerOpts, ORACLE_MAX_DIM,
};
use proptest::prelude::*;

fn opts() -> PowerOpts<f64> {
    PowerOpts::default()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn diagonal_and_rank_one_examples() {
    let t = leading_singular_triple(&Mat::diag(&[3.0, 1.0]), &opts()).unwrap();
    assert!((t.sigma - 3.0).abs() < 1e-12);
    assert!((t.u[0] - 1.0).abs() < 1e-9 && t.u[1].abs() < 1e-9);
    assert!((t.v[0] - 1.0).abs() < 1e-9);

    let m = Mat::from_row_major(2, 2, &[2.0, 2.0, 2.0, 2.0]).unwrap();
    let t = leading_singular_triple(&m, &opts()).unwrap();
    let h = 0.5f64.sqrt();
    assert!((t.sigma - 4.0).abs() < 1e-12);
    for k in 0..2 {
        assert!((t.u[k] - h).abs() < 1e-12);
        assert!((t.v[k] - h).abs() < 1e-12);
    }
}

#[test]
fn seeded_six_by_four_matches_oracle() {
    let m = common::gaussian_mat(6, 4, 11);
    let t = leading_singular_triple(&m, &opts()).unwrap();
    let svd = full_svd(&m).unwrap();
    assert!((t.sigma - svd.sigma[0]).abs() < 1e-8);
    assert!(dot(&t.u, svd.u.col(0)).abs() > 1.0 - 1e-8);
    assert!(dot(&t.v, svd.v.col(0)).abs() > 1.0 - 1e-8);
}

#[test]
fn zero_matrix_gives_canonical_triple() {
    let t = leading_singular_triple(&Mat::<f64>::zeros(3, 2), &opts()).unwrap();
    assert_eq!(t.sigma, 0.0);
    assert_eq!(t.u, vec![1.0, 0.0, 0.0]);
    assert_eq!(t.v, vec![1.0, 0.0]);
}

#[test]
fn non_convergence_reports_residual() {
    let m = common::with_spectrum(5, 4, &[1.0, 0.999], 2);
    let tight = PowerOpts {
        tol: 1e-14,
        max_iter: 2,
    };
    match leading_singular_triple(&m, &tight) {
        Err(LinalgError::NoConvergence {
            iterations,
            residual,
        }) => {
            assert_eq!(iterations, 2);
            assert!(residual > 0.0 && residual.is_finite());
        }
        other => panic!("expected NoConvergence, got {other:?}"),
    }
    // The lenient entry point hands back the last iterate instead.
    let (t, res) = power_iteration(&m, &tight).unwrap();
    assert!(res.is_some());
    assert!((norm2(&t.u) - 1.0).abs() < 1e-9);
}

#[test]
fn rejects_bad_options() {
    let m = Mat::identity(2);
    let zero_tol = PowerOpts {
        tol: 0.0,
        max_iter: 10,
    };
    assert!(leading_singular_triple(&m, &zero_tol).is_err());
    let zero_iter = PowerOpts {
        tol: 1e-10,
        max_iter: 0,
    };
    assert!(leading_singular_triple(&m, &zero_iter).is_err());
    let mut bad = Mat::identity(2);
    bad.set(0, 1, f64::NAN);
    assert_eq!(leading_singular_triple(&bad, &opts()), Err(LinalgError::NonFinite));
}

#[test]
fn full_svd_examples() {
    let s = full_svd(&Mat::<f64>::identity(3)).unwrap();
    for x in &s.sigma {
        assert!((x - 1.0).abs() < 1e-14);
    }
    let s = full_svd(&Mat::<f64>::diag(&[3.0, 1.0])).unwrap();
    assert!((s.sigma[0] - 3.0).abs() < 1e-14 && (s.sigma[1] - 1.0).abs() < 1e-14);

    let m = common::gaussian_mat(5, 3, 4);
    let s = full_svd(&m).unwrap();
    let resid = s.reconstruct().sub(&m).unwrap().frobenius_norm() / m.frobenius_norm();
    assert!(resid < 1e-9, "{resid}");
    assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]) && s.sigma[2] >= 0.0);

    let big = Mat::<f64>::zeros(ORACLE_MAX_DIM + 1, ORACLE_MAX_DIM + 1);
    assert!(matches!(full_svd(&big), Err(LinalgError::OracleTooLarge { .. })));
}

#[test]
fn nuclear_norm_examples() {
    assert!((nuclear_norm(&Mat::<f64>::diag(&[3.0, 1.0])).unwrap() - 4.0).abs() < 1e-14);
    assert!((nuclear_norm(&Mat::<f64>::identity(2)).unwrap() - 2.0).abs() < 1e-14);
    let m = common::gaussian_mat(5, 3, 8);
    let s: f64 = full_svd(&m).unwrap().sigma.iter().sum();
    assert!((nuclear_norm(&m).unwrap() - s).abs() < 1e-12);
}

#[test]
fn mixing_matrix_spectra() {
    let j = Mat::<f64>::from_fn(5, 5, |_, _| 0.2);
    assert!(second_largest_abs_eigenvalue(&j).unwrap().abs() < 1e-12);
    assert_eq!(second_largest_abs_eigenvalue(&Mat::<f64>::identity(4)).unwrap(), 1.0);

    // Circulant ring of four: eigenvalues (1 + 2cos(2πk/4))/3 = 1, 1/3, -1/3, 1/3.
    let ring = Mat::<f64>::from_fn(4, 4, |i, j| {
        if i == j || (i + 1) % 4 == j || (j + 1) % 4 == i {
            1.0 / 3.0
        } else {
            0.0
        }
    });
    assert!((second_largest_abs_eigenvalue(&ring).unwrap() - 1.0 / 3.0).abs() < 1e-12);

    let mut asym = Mat::<f64>::identity(3);
    asym.set(0, 2, 0.5);
    assert_eq!(second_largest_abs_eigenvalue(&asym), Err(LinalgError::NotSymmetric));
}

#[test]
fn single_precision_power_iteration() {
    let m = Mat::<f32>::diag(&[2.0, 0.5]);
    let t = leading_singular_triple(&m, &PowerOpts::default()).unwrap();
    assert!((t.sigma - 2.0).abs() < 1e-5);
}

/// 100 seeded spectra with a gap of at least 1.01.
#[test]
fn power_iteration_suite_against_oracle() {
    for seed in 0..100u64 {
        let rows = 3 + (seed % 7) as usize;
        let cols = 2 + (seed % 5) as usize;
        let k = rows.min(cols);
        let s1 = 1.0 + (seed % 13) as f64;
        let spectrum: Vec<f64> = (0..k).map(|i| s1 / 1.01f64.powi(i as i32 + (i > 0) as i32 * 2)).collect();
        let m = common::with_spectrum(rows, cols, &spectrum, seed);
        let t = leading_singular_triple(&m, &opts()).unwrap();
        let svd = full_svd(&m).unwrap();
        assert!((t.sigma - svd.sigma[0]).abs() <= 1e-8, "seed {seed}");
        assert!(dot(&t.u, svd.u.col(0)).abs() >= 1.0 - 1e-8, "seed {seed}");
    }
}

fn small_matrix() -> impl Strategy<Value = Mat<f64>> {
    (1usize..7, 1usize..7).prop_flat_map(|(r, c)| {
        prop::collection::vec(-5.0f64..5.0, r * c)
            .prop_map(move |v| Mat::from_row_major(r, c, &v).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_sandwich(m in small_matrix()) {
        let svd = full_svd(&m).unwrap();
        let spectral = svd.sigma[0];
        let nuc = nuclear_norm(&m).unwrap();
        let rank = svd.rank(1e-9 * spectral.max(1.0)).max(1) as f64;
        prop_assert!(spectral <= nuc + 1e-9);
        prop_assert!(nuc <= rank * spectral + 1e-9);
    }

    #[test]
    fn svd_reconstructs(m in small_matrix()) {
        let svd = full_svd(&m).unwrap();
        let err = svd.reconstruct().sub(&m).unwrap().frobenius_norm();
        prop_assert!(err <= 1e-9 * m.frobenius_norm().max(1.0));
        prop_assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn triples_are_unit_and_signed(m in small_matrix()) {
        prop_assume!(!m.is_zero());
        let (t, _) = power_iteration(&m, &opts()).unwrap();
        prop_assert!((norm2(&t.u) - 1.0).abs() <= 1e-9);
        prop_assert!((norm2(&t.v) - 1.0).abs() <= 1e-9);
        prop_assert!(t.sigma >= 0.0);
        if let Some(&first) = t.u.iter().find(|x| x.abs() > 1e-12) {
            prop_assert!(first > 0.0);
        }
    }

    #[test]
    fn repeated_calls_are_bitwise_equal(m in small_matrix()) {
        let a = power_iteration(&m, &opts()).unwrap();
        let b = power_iteration(&m, &opts()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn gapped_spectra_match_oracle(seed in 0u64..1_000_000, rows in 2usize..9, cols in 2usize..9, gap in 1.01f64..3.0) {
        let k = rows.min(cols);
        let spectrum: Vec<f64> = (0..k).map(|i| if i == 0 { 2.0 * gap } else { 2.0 / (i as f64) }).collect();
        let m = common::with_spectrum(rows, cols, &spectrum, seed);
        let t = leading_singular_triple(&m, &opts()).unwrap();
        let svd = full_svd(&m).unwrap();
        prop_assert!((t.sigma - svd.sigma[0]).abs() <= 1e-8);
        prop_assert!(dot(&t.u, svd.u.col(0)).abs() >= 1.0 - 1e-8);
        prop_assert!(dot(&t.v, svd.v.col(0)).abs() >= 1.0 - 1e-8);
    }
}
