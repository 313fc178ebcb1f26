#![allow(clippy::needless_range_loop)]

use xai_alignment::blackbox::{FnModel, LinearModel};
use xai_alignment::lime::{
    explain, explain_averaged, fit_weighted_ridge, kernel_weights, sample_neighborhood, LimeConfig,
};
use xai_alignment::matrix::{mean, std_pop, Matrix};
use xai_alignment::rng::stream;

use rand::Rng;

/// Gaussian elimination with partial pivoting on the normal equations
/// (XᵀWX + λI)u = XᵀWy, written out with plain loops.
fn normal_equations_oracle(x: &Matrix, y: &[f64], w: &[f64], lambda: f64) -> Vec<f64> {
    let d = x.cols();
    let mut a = vec![vec![0.0; d + 1]; d];
    for i in 0..x.rows() {
        for p in 0..d {
            for q in 0..d {
                a[p][q] += w[i] * x.get(i, p) * x.get(i, q);
            }
            a[p][d] += w[i] * x.get(i, p) * y[i];
        }
    }
    for (p, row) in a.iter_mut().enumerate() {
        row[p] += lambda;
    }
    for c in 0..d {
        let piv = (c..d).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, piv);
        for r in c + 1..d {
            let f = a[r][c] / a[c][c];
            for k in c..=d {
                a[r][k] -= f * a[c][k];
            }
        }
    }
    let mut u = vec![0.0; d];
    for c in (0..d).rev() {
        let s: f64 = (c + 1..d).map(|k| a[c][k] * u[k]).sum();
        u[c] = (a[c][d] - s) / a[c][c];
    }
    u
}

#[test]
fn neighborhood_is_centered_with_unit_variance() {
    let xi = [1.5, -2.0, 0.3];
    let n = 100_000;
    let s = sample_neighborhood(&xi, n, 4);
    for (j, c) in xi.iter().enumerate() {
        let col = s.column(j);
        assert!((mean(&col) - c).abs() <= 4.0 * (1.0 / n as f64).sqrt());
        let var = std_pop(&col).powi(2);
        assert!((var - 1.0).abs() <= 0.1, "variance {var}");
    }
    assert_eq!(sample_neighborhood(&xi, 50, 9), sample_neighborhood(&xi, 50, 9));
}

#[test]
fn kernel_weight_examples() {
    let xi = [0.0, 0.0];
    let nu = 1.5;
    let r = nu * 2f64.sqrt();
    let x = Matrix::from_rows(&[vec![0.0, 0.0], vec![r, 0.0]]).unwrap();
    let w = kernel_weights(&xi, &x, nu);
    assert_eq!(w[0], 1.0);
    assert!((w[1] - (-1f64).exp()).abs() < 1e-15);

    let far = Matrix::from_rows(&[vec![5f64.sqrt(), 0.0]]).unwrap();
    assert_eq!(kernel_weights(&xi, &far, 1e-3), vec![0.0]);
}

#[test]
fn ridge_recovers_exact_least_squares() {
    let x = Matrix::from_rows(&[
        vec![1.0, 0.0, 2.0],
        vec![0.0, 1.0, -1.0],
        vec![1.0, 1.0, 0.0],
        vec![2.0, -1.0, 1.0],
        vec![0.5, 0.5, 0.5],
    ])
    .unwrap();
    let beta = [1.5, -2.0, 0.25];
    let y: Vec<f64> = x
        .iter_rows()
        .map(|r| r.iter().zip(&beta).map(|(a, b)| a * b).sum())
        .collect();
    let u = fit_weighted_ridge(&x, &y, &[1.0; 5], 0.0).unwrap();
    for (a, b) in u.iter().zip(&beta) {
        assert!((a - b).abs() < 1e-9);
    }
    let shrunk = fit_weighted_ridge(&x, &y, &[1.0; 5], 1e12).unwrap();
    assert!(shrunk.iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn ridge_matches_normal_equations_oracle() {
    let mut r = stream(17, "test-ridge", 0);
    for _ in 0..20 {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| r.random_range(-3.0..3.0)).collect())
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = (0..50).map(|_| r.random_range(-5.0..5.0)).collect();
        let w: Vec<f64> = (0..50).map(|_| r.random_range(0.0..1.0)).collect();
        let lambda = r.random_range(0.0..2.0);
        let got = fit_weighted_ridge(&x, &y, &w, lambda).unwrap();
        let want = normal_equations_oracle(&x, &y, &w, lambda);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }
}

#[test]
fn constant_model_gets_zero_coefficients() {
    let m = LinearModel::new(vec![0.0; 3], 2.5);
    let e = explain(&m, &[0.1, 0.2, 0.3], &LimeConfig::default()).unwrap();
    assert!(e.coefficients.iter().all(|c| c.abs() < 1e-9), "{:?}", e.coefficients);
}

#[test]
fn wide_kernel_recovers_linear_slopes() {
    let m = FnModel::new(2, |x: &[f64]| 2.0 * x[0] - x[1]);
    for run in 0..10 {
        let cfg = LimeConfig {
            seed: run,
            ..LimeConfig::with_nu_n(1e4, 100_000)
        };
        let e = explain(&m, &[0.4, -0.7], &cfg).unwrap();
        assert!((e.coefficients[0] - 2.0).abs() < 0.05);
        assert!((e.coefficients[1] + 1.0).abs() < 0.05);
    }
}

#[test]
fn narrow_kernel_squeezes_coefficients() {
    let m = LinearModel::new(vec![3.0, -4.0, 1.0, 2.0, 5.0], 0.0);
    let cfg = LimeConfig::with_nu_n(1e-3, 1000);
    let e = explain(&m, &[0.2, 0.1, -0.3, 0.0, 1.0], &cfg).unwrap();
    assert!(e.coefficients.iter().all(|c| c.abs() <= 1e-6));
}

#[test]
fn averaging_one_seed_is_plain_explain() {
    let m = FnModel::new(3, |x: &[f64]| (x[0] * x[1]).tanh() + x[2].sin());
    let cfg = LimeConfig {
        seed: 5,
        ..Default::default()
    };
    let xi = [0.3, -0.2, 1.0];
    assert_eq!(
        explain_averaged(&m, &xi, &cfg, 1).unwrap().coefficients,
        explain(&m, &xi, &cfg).unwrap().coefficients
    );
}

#[test]
fn averaging_shrinks_seed_variance() {
    let m = FnModel::new(2, |x: &[f64]| (1.5 * x[0]).tanh() + 0.5 * (x[0] * x[1]).sin());
    let xi = [0.3, -0.4];
    let reps = 20u64;
    let single: Vec<f64> = (0..reps)
        .map(|r| {
            let cfg = LimeConfig {
                seed: 1000 + r,
                ..Default::default()
            };
            explain(&m, &xi, &cfg).unwrap().coefficients[0]
        })
        .collect();
    let averaged: Vec<f64> = (0..reps)
        .map(|r| {
            let cfg = LimeConfig {
                seed: 100_000 + 100 * r,
                ..Default::default()
            };
            explain_averaged(&m, &xi, &cfg, 100).unwrap().coefficients[0]
        })
        .collect();
    let ratio = std_pop(&averaged) / std_pop(&single);
    assert!((0.04..0.25).contains(&ratio), "ratio {ratio}");
}
