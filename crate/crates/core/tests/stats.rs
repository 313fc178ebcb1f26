mod common;

use proptest::prelude::*;
use xai_alignment::rng::stream;
use xai_alignment::stats::{test_improvement, wilcoxon_signed_rank, Alternative, Metric, Overall, PMethod, Wilcoxon};

use rand::Rng;

#[test]
fn worked_exact_case() {
    match wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0], Alternative::Greater).unwrap() {
        Wilcoxon::Tested { w_plus, p, n, method } => {
            assert_eq!(w_plus, 15.0);
            assert_eq!(p, 0.03125);
            assert_eq!(n, 5);
            assert_eq!(method, PMethod::Exact);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn all_zero_differences_give_no_evidence() {
    assert_eq!(
        wilcoxon_signed_rank(&[0.0; 6], Alternative::Greater).unwrap(),
        Wilcoxon::NoEvidence
    );
}

#[test]
fn all_negative_greater_is_certain() {
    // W⁺ = 0 is the minimum, so every sign pattern is at least as extreme.
    let p = wilcoxon_signed_rank(&[-1.0, -2.0, -3.0], Alternative::Greater)
        .unwrap()
        .p();
    assert_eq!(p, 1.0);
    assert_eq!(p, common::wilcoxon_greater_enumerated(&[-1.0, -2.0, -3.0]));
    let less = wilcoxon_signed_rank(&[-1.0, -2.0, -3.0], Alternative::Less)
        .unwrap()
        .p();
    assert_eq!(less, 0.125);
}

#[test]
fn large_samples_use_normal_approximation() {
    let diffs: Vec<f64> = (1..=40).map(f64::from).collect();
    match wilcoxon_signed_rank(&diffs, Alternative::Greater).unwrap() {
        Wilcoxon::Tested { method, p, .. } => {
            assert_eq!(method, PMethod::Normal);
            assert!(p < 1e-6);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn identical_samples_are_not_improved() {
    let old = vec![vec![0.2, 0.5, 0.9, 0.1]];
    let v = test_improvement(Metric::Concordance, &["all".into()], &old, &old, 0.05).unwrap();
    assert_eq!(v.overall, Overall::NotImproved);
}

#[test]
fn uniform_shift_is_improved_and_matches_sign_flips() {
    let mut r = stream(2, "test-shift", 0);
    let old: Vec<f64> = (0..30).map(|_| r.random_range(-1.0..1.0)).collect();
    let new: Vec<f64> = old.iter().map(|v| v + 1.0).collect();
    let v = test_improvement(
        Metric::Concordance,
        &["all".into()],
        std::slice::from_ref(&old),
        &[new],
        0.05,
    )
    .unwrap();
    assert_eq!(v.overall, Overall::Improved);
    // Monte Carlo sign-flip permutation of the 30 equal differences.
    let observed = 30.0;
    let mut hits = 0;
    let trials = 20_000;
    for _ in 0..trials {
        let s: f64 = (0..30).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).sum();
        if s >= observed {
            hits += 1;
        }
    }
    let mc = f64::from(hits) / f64::from(trials);
    assert!(mc < 0.05);
    assert!(v.per_dimension[0].p_better < 0.05);
}

#[test]
fn mixed_dimensions_are_not_improved() {
    let old = vec![vec![0.0; 20], vec![0.0; 20]];
    let new = vec![
        (1..=20).map(f64::from).collect(),
        (1..=20).map(|i| -f64::from(i)).collect(),
    ];
    let v = test_improvement(Metric::Directionality, &["a".into(), "b".into()], &old, &new, 0.05).unwrap();
    assert_eq!(v.overall, Overall::NotImproved);

    let worse = vec![(1..=20).map(|i| -f64::from(i)).collect(), vec![0.0; 20]];
    let v = test_improvement(Metric::Directionality, &["a".into(), "b".into()], &old, &worse, 0.05).unwrap();
    assert_eq!(v.overall, Overall::Worsened);
}

#[test]
fn non_finite_pairs_are_dropped() {
    let old = vec![vec![0.0, f64::NAN, 0.0, 0.0, 0.0, 0.0]];
    let new = vec![vec![1.0, 5.0, 2.0, 3.0, 4.0, 5.0]];
    let v = test_improvement(Metric::Relevance, &["k=1".into()], &old, &new, 0.05).unwrap();
    assert_eq!(v.per_dimension[0].n_pairs, 5);
    assert_eq!(v.per_dimension[0].p_better, 0.03125);
}

proptest! {
    #[test]
    fn exact_p_matches_enumeration(seed in 0u64..10_000, n in 1usize..=10) {
        let mut r = stream(seed, "prop-wilcoxon", 0);
        // Coarse values produce ties and zeros.
        let d: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(-4i32..=4))).collect();
        let want = common::wilcoxon_greater_enumerated(&d);
        let got = wilcoxon_signed_rank(&d, Alternative::Greater).unwrap().p();
        prop_assert!((got - want).abs() <= 1e-12, "{:?}: {} vs {}", d, got, want);
    }
}
