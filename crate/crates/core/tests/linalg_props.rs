mod common;

use classicality::linalg::*;
use classicality::thresholds::harmonic;
use common::*;
use num_complex::Complex64 as C64;
use proptest::prelude::*;
use rand::Rng as _;

fn eigen_residual(h: &ComplexMatrix) -> (f64, f64) {
    let e = eig_hermitian(h).unwrap();
    let d = h.dim();
    let lambda = ComplexMatrix::diagonal(&e.values);
    let lhs = h * &e.vectors;
    let rhs = &e.vectors * &lambda;
    ((&lhs - &rhs).max_abs(), (&(&e.vectors.adjoint() * &e.vectors) - &ComplexMatrix::identity(d)).max_abs())
}

#[test]
fn eigen_reconstruction_on_random_hermitian() {
    for d in [2, 3, 5, 7] {
        let mut r = rng(100 + d as u64);
        for _ in 0..100 {
            let h = random_hermitian(d, &mut r);
            let (res, orth) = eigen_residual(&h);
            assert!(res <= 1e-9 && orth <= 1e-10, "d={d}: {res:e} {orth:e}");
            let e = eig_hermitian(&h).unwrap();
            assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}

#[test]
fn textbook_spectra() {
    let x = ComplexMatrix::from_real(2, &[0.0, 1.0, 1.0, 0.0]);
    let e = eig_hermitian(&x).unwrap();
    assert!((e.values[0] + 1.0).abs() < 1e-14 && (e.values[1] - 1.0).abs() < 1e-14);
    let e = eig_hermitian(&ComplexMatrix::diagonal(&[1.0, 2.0])).unwrap();
    assert_eq!(e.values, vec![1.0, 2.0]);
    assert!((&e.vectors - &ComplexMatrix::identity(2)).max_abs() < 1e-15);
    let bad = ComplexMatrix::from_real(2, &[0.0, 1.0, 0.0, 0.0]);
    assert!(eig_hermitian(&bad).is_err());
}

#[test]
fn psd_square_roots() {
    let mut r = rng(7);
    for _ in 0..100 {
        let d = r.random_range(2..=6);
        let h = random_psd(d, &mut r);
        let s = sqrt_psd(&h).unwrap();
        assert!((&(&s * &s) - &h).max_abs() <= 1e-8);
        assert!(min_eigenvalue(&s).unwrap() >= -1e-10);
    }
    let s = sqrt_psd(&ComplexMatrix::diagonal(&[4.0, 9.0])).unwrap();
    assert!((&s - &ComplexMatrix::diagonal(&[2.0, 3.0])).max_abs() < 1e-14);
    assert!(matches!(sqrt_psd(&ComplexMatrix::diagonal(&[1.0, -1e-6])), Err(classicality::error::Error::Negativity { .. })));
}

#[test]
fn rank_one_square_root() {
    let mut r = rng(8);
    let u = haar_unitary(3, &mut r).unwrap().column(0);
    let h = ComplexMatrix::outer(&u).scale(0.5);
    let expected = ComplexMatrix::outer(&u).scale(std::f64::consts::FRAC_1_SQRT_2);
    assert!((&sqrt_psd(&h).unwrap() - &expected).max_abs() < 1e-8);
}

#[test]
fn hermitian_basis_round_trip() {
    let mut r = rng(9);
    for _ in 0..100 {
        let d = r.random_range(1..=6);
        let basis = HermitianBasis::new(d);
        let h = random_hermitian(d, &mut r);
        assert!((&basis.reconstruct(&basis.coefficients(&h)) - &h).max_abs() <= 1e-10);
    }
    let basis = HermitianBasis::new(3);
    for i in 0..9 {
        for j in 0..9 {
            let t = basis.element(i).trace_product(&basis.element(j));
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((t.re - expected).abs() <= 1e-10 && t.im.abs() <= 1e-10);
        }
    }
}

#[test]
fn haar_samples_are_unitary_and_reproducible() {
    let a = haar_unitary(3, &mut rng(5)).unwrap();
    let b = haar_unitary(3, &mut rng(5)).unwrap();
    assert_eq!(a, b);
    assert!(a.unitarity_residual() <= 1e-10);
    let one = haar_unitary(1, &mut rng(1)).unwrap();
    assert!((one[(0, 0)].norm() - 1.0).abs() < 1e-14);
    assert!(haar_unitary(0, &mut rng(1)).is_err());
}

#[test]
fn haar_first_moment() {
    let mut r = rng(44);
    let n = 100_000;
    let samples: Vec<f64> = (0..n).map(|_| haar_unitary(4, &mut r).unwrap()[(0, 0)].norm_sqr()).collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se = (var / n as f64).sqrt();
    assert!((mean - 0.25).abs() <= 3.0 * se, "{mean} ± {se}");
}

#[test]
fn max_component_matches_harmonic() {
    for d in [2usize, 3, 4, 5] {
        let mut r = rng(200 + d as u64);
        let (mean, se) = max_component_statistic(d, 100_000, &mut r).unwrap();
        let expected = harmonic(d).unwrap() / d as f64;
        assert!((mean - expected).abs() <= 3.0 * se, "d={d}: {mean} vs {expected} ± {se}");
    }
    let (mean, se) = max_component_statistic(1, 10, &mut rng(1)).unwrap();
    assert_eq!((mean, se), (1.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigen_residual_small(seed in any::<u64>(), d in 1usize..=8) {
        let h = random_hermitian(d, &mut rng(seed));
        let (res, orth) = eigen_residual(&h);
        prop_assert!(res <= 1e-9 && orth <= 1e-10);
    }

    #[test]
    fn projector_coefficients_agree(seed in any::<u64>(), d in 1usize..=6) {
        let u = haar_unitary(d, &mut rng(seed)).unwrap().column(0);
        let basis = HermitianBasis::new(d);
        let direct = basis.coefficients(&ComplexMatrix::outer(&u));
        let fast = basis.projector_coefficients(&u);
        for (a, b) in direct.iter().zip(&fast) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn split_join_round_trip(seed in any::<u64>(), d in 1usize..=5) {
        let h = random_hermitian(d, &mut rng(seed));
        let (re, im) = split_parts(&h);
        prop_assert_eq!(join_parts(d, &re, &im), h);
    }
}

#[test]
fn outer_product_is_rank_one() {
    let u = vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)];
    let p = ComplexMatrix::outer(&u);
    assert!((&(&p * &p) - &p).max_abs() < 1e-15);
}
