mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use ctpanel_core::reliability::{best_rater_subset, icc, krippendorff_alpha, AlphaLevel, RatingMatrix};

#[test]
fn icc_matches_anova_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (raters, rows) = common::random_ratings(&mut rng, 0.1);
        let m = RatingMatrix::curiosity(raters, rows.clone()).unwrap();
        let expected = common::icc_anova(&common::complete_rows(&rows));
        let got = icc(&m).unwrap();
        assert!((got - expected).abs() < 1e-10, "{got} vs {expected}");
    }
}

#[test]
fn alpha_matches_pair_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..20 {
        let (raters, rows) = common::random_ratings(&mut rng, 0.2);
        let m = RatingMatrix::curiosity(raters, rows.clone()).unwrap();
        for (level, ordinal) in [(AlphaLevel::Nominal, false), (AlphaLevel::Ordinal, true)] {
            let expected = common::alpha_pairs(&rows, 3, ordinal);
            let got = krippendorff_alpha(&m, level).unwrap();
            assert!((got - expected).abs() < 1e-10, "{level:?}: {got} vs {expected}");
        }
    }
}

#[test]
fn perfect_agreement_is_exactly_one() {
    let col = [0u8, 1, 2, 2, 1, 0, 2];
    for k in 2..=5 {
        let rows: Vec<Vec<Option<u8>>> = col.iter().map(|&v| vec![Some(v); k]).collect();
        let m = RatingMatrix::curiosity((0..k).map(|i| format!("r{i}")).collect(), rows).unwrap();
        assert_eq!(icc(&m).unwrap(), 1.0);
        assert_eq!(krippendorff_alpha(&m, AlphaLevel::Nominal).unwrap(), 1.0);
        assert_eq!(krippendorff_alpha(&m, AlphaLevel::Ordinal).unwrap(), 1.0);
    }
}

#[test]
fn subset_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let (raters, rows) = common::random_ratings(&mut rng, 0.0);
        let m = RatingMatrix::curiosity(raters, rows).unwrap();
        let Some(expected) = common::best_subset_icc(&m, 2) else {
            continue;
        };
        let got = best_rater_subset(&m, 2).unwrap();
        assert!((got.icc - expected).abs() < 1e-10, "{} vs {expected}", got.icc);
        let recomputed = icc(&m.select(&got.columns)).unwrap();
        assert!((recomputed - got.icc).abs() < 1e-12);
    }
}

#[test]
fn four_raters_enumerate_eleven_subsets() {
    let rows = vec![
        vec![Some(0), Some(1), Some(2), Some(0)],
        vec![Some(1), Some(1), Some(0), Some(2)],
        vec![Some(2), Some(0), Some(2), Some(1)],
    ];
    let m = RatingMatrix::curiosity((0..4).map(|i| format!("r{i}")).collect(), rows).unwrap();
    assert_eq!(best_rater_subset(&m, 2).unwrap().n_candidates, 11);
}

#[test]
fn independent_columns_have_icc_near_zero() {
    use rand::seq::SliceRandom;
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let base: Vec<u8> = (0..10_000).map(|i| (i % 3) as u8).collect();
    let mut a = base.clone();
    let mut b = base;
    a.shuffle(&mut rng);
    b.shuffle(&mut rng);
    let rows = a.iter().zip(&b).map(|(&x, &y)| vec![Some(x), Some(y)]).collect();
    let m = RatingMatrix::curiosity(vec!["a".into(), "b".into()], rows).unwrap();
    assert!(icc(&m).unwrap().abs() < 0.05);
}

proptest! {
    #[test]
    fn icc_is_invariant_to_rater_order(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (raters, rows) = common::random_ratings(&mut rng, 0.0);
        let m = RatingMatrix::curiosity(raters, rows).unwrap();
        let k = m.raters().len();
        let reversed: Vec<usize> = (0..k).rev().collect();
        let a = icc(&m).unwrap();
        let b = icc(&m.select(&reversed)).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
        prop_assert!(a <= 1.0 + 1e-12);
    }

    #[test]
    fn alpha_never_exceeds_one(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (raters, rows) = common::random_ratings(&mut rng, 0.3);
        let m = RatingMatrix::curiosity(raters, rows).unwrap();
        if let Ok(a) = krippendorff_alpha(&m, AlphaLevel::Nominal) {
            prop_assert!(a <= 1.0 + 1e-12);
        }
    }
}
