#![allow(clippy::needless_range_loop)]

use xai_alignment::blackbox::{FnModel, LinearModel};
use xai_alignment::rng::stream;
use xai_alignment::shap::{
    mean_abs_shap, normalize_shap, shap_exact, shap_linear, shap_sampled, ShapConfig, ShapExplanation, ShapMethod,
};
use xai_alignment::Error;

use rand::Rng;
use rand_distr::StandardNormal;

fn cfg_with(bg: Vec<f64>) -> ShapConfig {
    ShapConfig {
        background: Some(bg),
        ..Default::default()
    }
}

fn nonlinear() -> FnModel<impl Fn(&[f64]) -> f64 + Sync> {
    FnModel::new(8, |x: &[f64]| {
        (x[0] * x[1]).tanh() + (x[2] + x[3] * x[4]).sin() + 0.5 * x[5] * x[6].abs() - x[7].powi(2) / 3.0
    })
}

#[test]
fn exact_linear_matches_closed_form() {
    let beta = vec![1.0, -2.0, 0.5, 3.0];
    let m = LinearModel::new(beta.clone(), 0.7);
    let xi = [0.3, 1.1, -2.0, 0.0];
    let bg = vec![0.1, -0.4, 0.2, 0.5];
    let e = shap_exact(&m, &xi, &cfg_with(bg.clone())).unwrap();
    for j in 0..4 {
        assert!((e.phi[j] - beta[j] * (xi[j] - bg[j])).abs() < 1e-9);
    }
    let at_bg = shap_exact(&m, &bg, &cfg_with(bg.clone())).unwrap();
    assert!(at_bg.phi.iter().all(|p| p.abs() < 1e-12));
}

#[test]
fn two_player_product_matches_hand_table() {
    // v(∅) = 0, v({1}) = 0, v({2}) = 0, v({1,2}) = 6.
    let m = FnModel::new(2, |x: &[f64]| x[0] * x[1]);
    let e = shap_exact(&m, &[2.0, 3.0], &cfg_with(vec![0.0, 0.0])).unwrap();
    assert_eq!(e.phi, vec![3.0, 3.0]);
    // v({1}) = 2·1 = 2, v({2}) = 0·3 = 0, v(∅) = 0, v({1,2}) = 6.
    let e = shap_exact(&m, &[2.0, 3.0], &cfg_with(vec![0.0, 1.0])).unwrap();
    assert!((e.phi[0] - 0.5 * (2.0 + 6.0)).abs() < 1e-12);
    assert!((e.phi[1] - 0.5 * (0.0 + 4.0)).abs() < 1e-12);
}

#[test]
fn efficiency_holds_for_exact_values() {
    let m = nonlinear();
    let xi = [0.3, -1.0, 0.5, 0.8, -0.2, 1.2, -0.7, 0.4];
    let e = shap_exact(&m, &xi, &cfg_with(vec![0.0; 8])).unwrap();
    use xai_alignment::blackbox::BlackBox;
    let total: f64 = e.phi.iter().sum();
    assert!((total - (m.predict(&xi) - m.predict(&[0.0; 8]))).abs() < 1e-12);
}

#[test]
fn sampling_agrees_with_enumeration_within_three_se() {
    let m = nonlinear();
    let xi = [0.3, -1.0, 0.5, 0.8, -0.2, 1.2, -0.7, 0.4];
    let exact = shap_exact(&m, &xi, &cfg_with(vec![0.0; 8])).unwrap();
    let cfg = ShapConfig {
        method: ShapMethod::PermutationSampling,
        n_permutations: 2000,
        seed: 3,
        ..cfg_with(vec![0.0; 8])
    };
    let s = shap_sampled(&m, &xi, &cfg).unwrap();
    let se = s.std_errors.clone().unwrap();
    for j in 0..8 {
        assert!(
            (s.phi[j] - exact.phi[j]).abs() <= 3.0 * se[j] + 1e-12,
            "feature {j}: {} vs {} (se {})",
            s.phi[j],
            exact.phi[j],
            se[j]
        );
    }
}

#[test]
fn doubling_permutations_shrinks_standard_errors() {
    let m = nonlinear();
    let xi = [0.3, -1.0, 0.5, 0.8, -0.2, 1.2, -0.7, 0.4];
    let run = |n| {
        let cfg = ShapConfig {
            method: ShapMethod::PermutationSampling,
            n_permutations: n,
            seed: 8,
            ..cfg_with(vec![0.0; 8])
        };
        shap_sampled(&m, &xi, &cfg).unwrap().std_errors.unwrap()
    };
    let (a, b) = (run(2000), run(4000));
    // Antithetic pairs make purely additive and two-way terms exact, so only
    // the three-way term (features 2, 3, 4) carries sampling error.
    let ratio: f64 = (2..5).map(|j| b[j] / a[j]).sum::<f64>() / 3.0;
    assert!((ratio - 0.5f64.sqrt()).abs() < 0.08, "ratio {ratio}");
}

#[test]
fn constant_model_has_zero_attributions() {
    let m = FnModel::new(5, |_: &[f64]| 4.2);
    let cfg = ShapConfig {
        method: ShapMethod::PermutationSampling,
        n_permutations: 50,
        ..cfg_with(vec![0.0; 5])
    };
    let s = shap_sampled(&m, &[1.0, 2.0, 3.0, 4.0, 5.0], &cfg).unwrap();
    assert!(s.phi.iter().all(|&p| p == 0.0));
}

#[test]
fn closed_form_examples() {
    let e = shap_linear(&[2.0, -1.0], 0.0, &[1.0, 3.0], &[0.0, 1.0]).unwrap();
    assert_eq!(e.phi, vec![2.0, -2.0]);
    let e = shap_linear(&[2.0, -1.0], 0.0, &[1.0, 1.0], &[0.0, 1.0]).unwrap();
    assert_eq!(e.phi[1], 0.0);
    // Positive effect, instance below the reference: negative attribution.
    let e = shap_linear(&[4.0], 0.0, &[-1.0], &[0.5]).unwrap();
    assert!(e.phi[0] < 0.0);
}

#[test]
fn normalization_recovers_beta_and_flags_zero_gaps() {
    let beta = vec![1.0, -2.0, 0.5];
    let xbar = vec![0.0, 0.5, -0.5];
    let xi = vec![1.0, 2.0, -0.5];
    let e = shap_linear(&beta, 0.0, &xi, &xbar).unwrap();
    let n = normalize_shap(&e, &xi, &xbar, 1e-6).unwrap();
    assert!((n.values[0] - 1.0).abs() < 1e-9);
    assert!((n.values[1] + 2.0).abs() < 1e-9);
    assert!(n.undefined[2] && n.values[2].is_nan());
    assert!(!n.undefined[0] && !n.undefined[1]);

    let zero = ShapExplanation {
        phi: vec![0.0, 1.0],
        base_value: 0.0,
        instance: vec![1.0, 1.0],
        std_errors: None,
    };
    let n = normalize_shap(&zero, &[1.0, 1.0], &[0.0, 0.0], 1e-6).unwrap();
    assert_eq!(n.values[0], 0.0);
}

#[test]
fn mean_abs_examples() {
    let mk = |phi: Vec<f64>| ShapExplanation {
        instance: vec![0.0; phi.len()],
        phi,
        base_value: 0.0,
        std_errors: None,
    };
    assert_eq!(mean_abs_shap(&[mk(vec![-1.0, 2.0])]).unwrap(), vec![1.0, 2.0]);
    assert_eq!(mean_abs_shap(&[mk(vec![0.7]), mk(vec![-0.7])]).unwrap(), vec![0.7]);
}

#[test]
fn mean_abs_follows_half_normal_mean() {
    let beta = [2.0, -0.5, 1.0];
    let mut r = stream(5, "test-half-normal", 0);
    let expl: Vec<ShapExplanation> = (0..20_000)
        .map(|_| {
            let xi: Vec<f64> = (0..3).map(|_| r.sample(StandardNormal)).collect();
            shap_linear(&beta, 0.0, &xi, &[0.0; 3]).unwrap()
        })
        .collect();
    let m = mean_abs_shap(&expl).unwrap();
    let c = (2.0 / std::f64::consts::PI).sqrt();
    for j in 0..3 {
        let want = beta[j].abs() * c;
        assert!((m[j] - want).abs() < 0.03 * want, "{} vs {want}", m[j]);
    }
}

#[test]
fn exact_refuses_too_many_features() {
    let m = LinearModel::new(vec![1.0; 21], 0.0);
    let r = shap_exact(&m, &[0.0; 21], &ShapConfig::default());
    assert!(matches!(r, Err(Error::TooManyFeatures { .. })));
}
