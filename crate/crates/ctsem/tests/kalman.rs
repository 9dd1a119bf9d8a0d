mod common;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ctpanel_ctsem::mat::Mat;
use ctpanel_ctsem::{group_loglik, kalman_filter, GroupData, GroupParams, Subject};

#[test]
fn matches_joint_gaussian_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for case in 0..50 {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=2);
        let p = rng.random_range(1..=2);
        let t_len = rng.random_range(1..=5);
        let params = common::random_params(&mut rng, n, m, p);
        let subject = common::random_subject(&mut rng, t_len, m, p);
        let expected = common::joint_loglik(&params, &subject);
        let got = kalman_filter(&params, &subject, false).unwrap().loglik;
        assert!((got - expected).abs() < 1e-6, "case {case}: {got} vs {expected}");
    }
}

#[test]
fn diagonal_path_matches_joint_gaussian_density() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..30 {
        let n = rng.random_range(1..=4);
        let mut params = common::random_params(&mut rng, n, 1, 2);
        params.drift = Mat::diag(&(0..n).map(|_| -rng.random_range(0.05..2.0)).collect::<Vec<_>>());
        params.diffusion_chol = Mat::identity(n);
        params.init_mean = None;
        params.init_chol = None;
        params.cint = None;
        let subject = common::random_subject(&mut rng, 5, 1, 2);
        let expected = common::joint_loglik(&params, &subject);
        let got = kalman_filter(&params, &subject, true).unwrap().loglik;
        assert!((got - expected).abs() < 1e-6, "{got} vs {expected}");
    }
}

#[test]
fn single_observation_example() {
    let mut params = GroupParams::template(1, 1, 1);
    params.loadings = Mat::diag(&[1.0]);
    params.init_mean = Some(vec![0.0]);
    params.init_chol = Some(Mat::diag(&[1.0]));
    let subject = Subject {
        id: "s".into(),
        times: vec![0.0],
        predictors: vec![vec![0.0]],
        manifests: vec![vec![Some(0.0)]],
    };
    let ll = kalman_filter(&params, &subject, false).unwrap().loglik;
    assert!((ll - (-0.5 * (2.0 * std::f64::consts::PI * 2.0).ln())).abs() < 1e-12);
    assert!((ll + 1.26551).abs() < 1e-5);
}

#[test]
fn empty_series_has_zero_loglik() {
    let params = GroupParams::template(2, 1, 1);
    let subject = Subject {
        id: "s".into(),
        times: vec![],
        predictors: vec![],
        manifests: vec![],
    };
    assert_eq!(kalman_filter(&params, &subject, false).unwrap().loglik, 0.0);
}

#[test]
fn filtered_covariances_are_symmetric_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..20 {
        let params = common::random_params(&mut rng, 3, 2, 1);
        let subject = common::random_subject(&mut rng, 8, 2, 1);
        let out = kalman_filter(&params, &subject, false).unwrap();
        for c in &out.filtered_covs {
            let c = common::na(c);
            assert!((&c - c.transpose()).norm() < 1e-12);
            assert!(c.symmetric_eigen().eigenvalues.iter().all(|&v| v > -1e-12));
        }
    }
}

proptest! {
    #[test]
    fn group_total_is_sum_of_subjects(seed in 0u64..5000, n_sub in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = common::random_params(&mut rng, 2, 1, 1);
        // Equal lengths and grids so several subjects share a covariance path.
        let subjects: Vec<Subject> = (0..n_sub)
            .map(|i| {
                let mut s = common::random_subject(&mut rng, 4, 1, 1);
                s.times = vec![1.0, 2.0, 3.0, 4.0];
                s.id = format!("s{i}");
                s
            })
            .collect();
        let each: f64 = subjects
            .iter()
            .map(|s| kalman_filter(&params, s, false).unwrap().loglik)
            .sum();
        let data = GroupData { group_id: "g".into(), subjects };
        let total: f64 = group_loglik(&params, &data, false).unwrap();
        prop_assert!((total - each).abs() < 1e-9 * each.abs().max(1.0));
    }
}
