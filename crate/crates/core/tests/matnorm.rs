mod common;

use approx::assert_abs_diff_eq;
use moclust::matnorm::{log_density, mahalanobis, normalize_identifiability, sample};
use moclust::rng::seeded;
use moclust::{ComponentParams, Matrix, ObsMatrix};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::*;

#[test]
fn log_density_matches_kronecker_2x3() {
    let mut rng = seeded(11);
    let p = random_component(2, 3, 1.0, &mut rng);
    let x = random_obs(2, 3, &mut rng);
    let (oracle, _) = brute_force(x.matrix(), &p);
    assert_abs_diff_eq!(log_density(&x, &p).unwrap(), oracle, epsilon = 1e-10);
}

#[test]
fn mahalanobis_matches_kronecker_3x2() {
    let mut rng = seeded(12);
    let p = random_component(3, 2, 1.0, &mut rng);
    let x = random_obs(3, 2, &mut rng);
    let (_, oracle) = brute_force(x.matrix(), &p);
    assert_abs_diff_eq!(mahalanobis(&x, &p).unwrap(), oracle, epsilon = 1e-10);
}

#[test]
fn larger_instance_matches_kronecker() {
    let mut rng = seeded(13);
    let p = random_component(6, 6, 1.0, &mut rng);
    let x = random_obs(6, 6, &mut rng);
    let (ld, maha) = brute_force(x.matrix(), &p);
    assert_abs_diff_eq!(log_density(&x, &p).unwrap(), ld, epsilon = 1e-9);
    assert_abs_diff_eq!(mahalanobis(&x, &p).unwrap(), maha, epsilon = 1e-9);
}

#[test]
fn sample_moments() {
    let mut rng = seeded(21);
    let mean = Matrix::from_rows(&[[1.0, -2.0], [0.5, 3.0]]);
    let u = Matrix::from_rows(&[[1.0, 0.3], [0.3, 1.0]]);
    let v = Matrix::from_rows(&[[1.0, -0.4], [-0.4, 1.0]]);
    let p = ComponentParams::new(mean.clone(), u.clone(), v.clone(), 1.0).unwrap();
    let draws: Vec<ObsMatrix> = (0..10_000).map(|_| sample(&p, &mut rng).unwrap()).collect();
    let (m, cov) = vec_covariance(&draws);
    let target = vec_of(&mean);
    for k in 0..4 {
        assert!(
            (m[k] - target[k]).abs() < 0.05,
            "mean entry {k}: {} vs {}",
            m[k],
            target[k]
        );
    }
    assert!(rel_frobenius(&cov, &kronecker(&v, &u)) < 0.10);
}

#[test]
fn identity_sampling_is_deterministic() {
    let p = ComponentParams::new(
        Matrix::zeros(2, 3),
        Matrix::identity(2),
        Matrix::identity(3),
        1.0,
    )
    .unwrap();
    let a = sample(&p, &mut seeded(3)).unwrap();
    let b = sample(&p, &mut seeded(3)).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, sample(&p, &mut seeded(4)).unwrap());
}

#[test]
fn mahalanobis_is_chi_squared() {
    let mut rng = seeded(31);
    let p = random_component(2, 3, 1.0, &mut rng);
    let d: Vec<f64> = (0..10_000)
        .map(|_| mahalanobis(&sample(&p, &mut rng).unwrap(), &p).unwrap())
        .collect();
    let chi = ChiSquared::new(6.0).unwrap();
    let (_, pval) = ks_test(&d, |x| chi.cdf(x));
    assert!(pval > 0.01, "KS p-value {pval}");
}

#[test]
fn normalization_keeps_density() {
    let mut rng = seeded(41);
    for _ in 0..20 {
        let p = random_component(3, 4, 1.0, &mut rng);
        let (u, v) = normalize_identifiability(&p.row_cov, &p.col_cov).unwrap();
        assert_abs_diff_eq!(u.trace(), 3.0, epsilon = 1e-12);
        let q = ComponentParams::new(p.mean.clone(), u, v, 1.0).unwrap();
        let x = random_obs(3, 4, &mut rng);
        assert_abs_diff_eq!(
            log_density(&x, &p).unwrap(),
            log_density(&x, &q).unwrap(),
            epsilon = 1e-10
        );
        let k1 = kronecker(&p.col_cov, &p.row_cov);
        let k2 = kronecker(&q.col_cov, &q.row_cov);
        assert!(rel_frobenius(&k2, &k1) < 1e-12);
    }
}

#[test]
fn non_positive_definite_is_rejected() {
    let bad = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]);
    let p = ComponentParams::new(Matrix::zeros(2, 2), bad, Matrix::identity(2), 1.0).unwrap();
    let x = ObsMatrix::new(2, 2, vec![0.0; 4]).unwrap();
    assert!(matches!(
        log_density(&x, &p),
        Err(moclust::Error::NotPositiveDefinite(_))
    ));
    let wrong = ObsMatrix::new(2, 3, vec![0.0; 6]).unwrap();
    let ok = ComponentParams::new(
        Matrix::zeros(2, 2),
        Matrix::identity(2),
        Matrix::identity(2),
        1.0,
    )
    .unwrap();
    assert!(matches!(
        log_density(&wrong, &ok),
        Err(moclust::Error::Dimension(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kronecker_equivalence(r in 1usize..=4, c in 1usize..=4, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let p = random_component(r, c, 1.0, &mut rng);
        let x = random_obs(r, c, &mut rng);
        let (ld, maha) = brute_force(x.matrix(), &p);
        prop_assert!((log_density(&x, &p).unwrap() - ld).abs() < 1e-10);
        prop_assert!((mahalanobis(&x, &p).unwrap() - maha).abs() < 1e-10);
    }

    #[test]
    fn scale_invariance(r in 1usize..=4, c in 1usize..=4, a in 0.05f64..50.0, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let p = random_component(r, c, 1.0, &mut rng);
        let q = ComponentParams::new(p.mean.clone(), p.row_cov.scaled(a), p.col_cov.scaled(1.0 / a), 1.0).unwrap();
        let x = random_obs(r, c, &mut rng);
        prop_assert!((log_density(&x, &p).unwrap() - log_density(&x, &q).unwrap()).abs() < 1e-10);
        prop_assert!((mahalanobis(&x, &p).unwrap() - mahalanobis(&x, &q).unwrap()).abs() < 1e-10);
    }

    #[test]
    fn mahalanobis_nonnegative_and_zero_at_mean(r in 1usize..=4, c in 1usize..=4, seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let p = random_component(r, c, 1.0, &mut rng);
        let x = random_obs(r, c, &mut rng);
        prop_assert!(mahalanobis(&x, &p).unwrap() > 0.0);
        let at_mean = ObsMatrix::from_matrix(p.mean.clone()).unwrap();
        prop_assert_eq!(mahalanobis(&at_mean, &p).unwrap(), 0.0);
    }
}
