mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctpanel_ctsem::dynamics::check_stable;
use ctpanel_ctsem::mat::Mat;
use ctpanel_ctsem::{discretize_dynamics, stationary_covariance};

use common::{mat, na};

#[test]
fn scalar_closed_forms() {
    for a in [-2.0, -1.0, -0.1] {
        for dt in [0.1, 1.0, 10.0] {
            let (q, b) = (1.3, 0.7);
            let d = discretize_dynamics(&Mat::diag(&[a]), &[b], &Mat::diag(&[q]), dt).unwrap();
            let e = (a * dt).exp();
            assert!((d.a_d[(0, 0)] - e).abs() < 1e-8);
            let q_d = q * (1.0 - (2.0 * a * dt).exp()) / (-2.0 * a);
            assert!((d.q_d[(0, 0)] - q_d).abs() < 1e-8, "a {a} dt {dt}");
            assert!((d.b_d[0] - (e - 1.0) * b / a).abs() < 1e-8);
        }
    }
}

#[test]
fn documented_examples() {
    let d = discretize_dynamics(&Mat::diag(&[-0.5]), &[0.0], &Mat::diag(&[1.0]), 2.0).unwrap();
    assert!((d.a_d[(0, 0)] - (-1.0f64).exp()).abs() < 1e-12);
    assert!((d.q_d[(0, 0)] - (1.0 - (-2.0f64).exp())).abs() < 1e-12);

    let z = discretize_dynamics(&Mat::diag(&[-0.5, -1.0]), &[1.0, 2.0], &Mat::identity(2), 0.0).unwrap();
    assert_eq!(z.a_d, Mat::identity(2));
    assert_eq!(z.b_d, vec![0.0, 0.0]);
    assert_eq!(z.q_d, Mat::zeros(2, 2));

    let q = stationary_covariance(&Mat::diag(&[-0.5]), &Mat::diag(&[1.0])).unwrap();
    assert!((q[(0, 0)] - 1.0).abs() < 1e-12);
    let q = stationary_covariance(&Mat::diag(&[-1.0, -1.0]), &Mat::identity(2)).unwrap();
    assert!(q.max_abs_diff(&Mat::diag(&[0.5, 0.5])) < 1e-12);
}

#[test]
fn unstable_drift_is_rejected() {
    assert!(stationary_covariance(&Mat::diag(&[0.1]), &Mat::diag(&[1.0])).is_err());
    assert!(check_stable(&Mat::from_rows(&[vec![-1.0, 3.0], vec![3.0, 0.5]])).is_err());
    assert!(discretize_dynamics(&Mat::diag(&[f64::NAN]), &[0.0], &Mat::diag(&[1.0]), 1.0).is_err());
}

fn semigroup_error(rng: &mut ChaCha8Rng, n: usize) -> f64 {
    let a = mat(&common::random_stable(rng, n));
    let q = mat(&common::random_spd(rng, n));
    let b: Vec<f64> = (0..n).map(|_| common::normal(rng)).collect();
    let (t1, t2) = (rng.random_range(0.05..3.0), rng.random_range(0.05..3.0));
    let d1 = discretize_dynamics(&a, &b, &q, t1).unwrap();
    let d2 = discretize_dynamics(&a, &b, &q, t2).unwrap();
    let d12 = discretize_dynamics(&a, &b, &q, t1 + t2).unwrap();
    let a_comp = d2.a_d.matmul(&d1.a_d);
    let b_comp: Vec<f64> = d2
        .a_d
        .mul_vec(&d1.b_d)
        .iter()
        .zip(&d2.b_d)
        .map(|(x, y)| x + y)
        .collect();
    let q_comp = d2.a_d.sandwich(&d1.q_d).add(&d2.q_d);
    let b_err = b_comp
        .iter()
        .zip(&d12.b_d)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    a_comp
        .max_abs_diff(&d12.a_d)
        .max(q_comp.max_abs_diff(&d12.q_d))
        .max(b_err)
}

#[test]
fn semigroup_on_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let err = semigroup_error(&mut rng, 4);
        assert!(err < 1e-9, "{err}");
    }
}

#[test]
fn lyapunov_residual_on_random_systems() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for i in 0..100 {
        let n = 1 + i % 6;
        let a = common::random_stable(&mut rng, n);
        let q = common::random_spd(&mut rng, n);
        let x = na(&stationary_covariance(&mat(&a), &mat(&q)).unwrap());
        let resid = &a * &x + &x * a.transpose() + &q;
        assert!(resid.norm() < 1e-10, "n {n}: {}", resid.norm());
        assert!((&x - x.transpose()).norm() < 1e-12);
        assert!(x.clone().cholesky().is_some());
    }
}

#[test]
fn discretization_matches_van_loan() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..50 {
        let n = 1 + i % 5;
        let a = common::random_stable(&mut rng, n);
        let q = common::random_spd(&mut rng, n);
        let b: Vec<f64> = (0..n).map(|_| common::normal(&mut rng)).collect();
        let dt = rng.random_range(0.01..2.0);
        let d = discretize_dynamics(&mat(&a), &b, &mat(&q), dt).unwrap();
        let (a_d, q_d) = common::van_loan(&a, &q, dt);
        assert!((na(&d.a_d) - a_d).norm() < 1e-9);
        let err = (na(&d.q_d) - &q_d).norm();
        assert!(err < 1e-9 * q_d.norm().max(1.0), "n {n} dt {dt}: {err}");
        let b_d = DMatrix::from_vec(n, 1, common::integrated_intercept(&a, &b, dt));
        assert!((DMatrix::from_vec(n, 1, d.b_d.clone()) - b_d).norm() < 1e-9);
    }
}

proptest! {
    #[test]
    fn semigroup_property(seed in 0u64..10_000, n in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        prop_assert!(semigroup_error(&mut rng, n) < 1e-9);
    }

    #[test]
    fn process_noise_is_psd(seed in 0u64..10_000, n in 1usize..5, dt in 0.01f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = mat(&common::random_stable(&mut rng, n));
        let q = mat(&common::random_spd(&mut rng, n));
        let d = discretize_dynamics(&a, &vec![0.0; n], &q, dt).unwrap();
        let eig = na(&d.q_d).symmetric_eigen();
        prop_assert!(eig.eigenvalues.iter().all(|&v| v > -1e-10));
    }
}
