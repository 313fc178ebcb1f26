//! Local surrogate explanations: Gaussian perturbations around the
//! instance, an exponential distance kernel and a weighted ridge fit.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::blackbox::BlackBox;
use crate::error::{Error, Result};
use crate::linalg::solve_symmetric;
use crate::matrix::Matrix;
use crate::rng;

pub const DEFAULT_SAMPLES: usize = 1000;
pub const DEFAULT_LAMBDA: f64 = 1.0;

/// Quartile cut points of a standard normal, used when no training
/// quartiles are supplied.
pub const NORMAL_QUARTILES: [f64; 3] = [-0.674_489_750_196_081_7, 0.0, 0.674_489_750_196_081_7];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimeConfig {
    /// Kernel width; `None` means 0.75·√D.
    pub nu: Option<f64>,
    pub n_samples: usize,
    pub discretize: bool,
    pub ridge_lambda: f64,
    pub seed: u64,
    /// Fit an unpenalized intercept by weighted centering. Off, the fit is
    /// the bare `(XᵀWX + λI)⁻¹XᵀWy`.
    pub fit_intercept: bool,
    /// Per-feature quartile cut points for discretization.
    pub quartiles: Option<Vec<[f64; 3]>>,
}

impl Default for LimeConfig {
    fn default() -> Self {
        LimeConfig {
            nu: None,
            n_samples: DEFAULT_SAMPLES,
            discretize: false,
            ridge_lambda: DEFAULT_LAMBDA,
            seed: 0,
            fit_intercept: true,
            quartiles: None,
        }
    }
}

impl LimeConfig {
    pub fn with_nu_n(nu: f64, n_samples: usize) -> Self {
        LimeConfig {
            nu: Some(nu),
            n_samples,
            ..Default::default()
        }
    }

    pub fn resolved_nu(&self, d: usize) -> f64 {
        self.nu.unwrap_or(0.75 * (d as f64).sqrt())
    }

    fn validate(&self, d: usize) -> Result<()> {
        let nu = self.resolved_nu(d);
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::config("nu", "must be positive and finite"));
        }
        if self.n_samples == 0 {
            return Err(Error::config("n_samples", "must be at least 1"));
        }
        if !(self.ridge_lambda >= 0.0) {
            return Err(Error::config("ridge_lambda", "must be non-negative"));
        }
        if let Some(q) = &self.quartiles {
            if q.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: q.len(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimeExplanation {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub instance: Vec<f64>,
    pub config: LimeConfig,
    /// Every kernel weight was zero, so the fit collapsed to the
    /// pure-penalty solution.
    pub weights_underflowed: bool,
}

/// `n` rows drawn i.i.d. from N(ξ, I).
pub fn sample_neighborhood(xi: &[f64], n: usize, seed: u64) -> Matrix {
    let mut r = rng::stream(seed, "lime-samples", 0);
    let d = xi.len();
    let mut m = Matrix::zeros(n, d);
    for i in 0..n {
        for (v, c) in m.row_mut(i).iter_mut().zip(xi) {
            let e: f64 = StandardNormal.sample(&mut r);
            *v = c + e;
        }
    }
    m
}

/// `exp(−‖ξ − x‖² / 2ν²)` for every row.
pub fn kernel_weights(xi: &[f64], x: &Matrix, nu: f64) -> Vec<f64> {
    let s = 2.0 * nu * nu;
    x.iter_rows()
        .map(|r| {
            let d2: f64 = r.iter().zip(xi).map(|(a, b)| (a - b) * (a - b)).sum();
            (-d2 / s).exp()
        })
        .collect()
}

fn check_dims(x: &Matrix, y: &[f64], w: &[f64]) -> Result<()> {
    if y.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: y.len(),
        });
    }
    if w.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: w.len(),
        });
    }
    Ok(())
}

/// `(XᵀWX + λI)⁻¹ XᵀWy` by a symmetric solve.
pub fn fit_weighted_ridge(x: &Matrix, y: &[f64], w: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_dims(x, y, w)?;
    if !(lambda >= 0.0) {
        return Err(Error::config("lambda", "must be non-negative"));
    }
    let (gram, rhs) = weighted_normal_equations(x, y, w, None);
    ridge_solve(gram, rhs, lambda)
}

fn ridge_solve(mut gram: DMatrix<f64>, rhs: DVector<f64>, lambda: f64) -> Result<Vec<f64>> {
    for j in 0..gram.nrows() {
        gram[(j, j)] += lambda;
    }
    Ok(solve_symmetric(&gram, &rhs)?.iter().copied().collect())
}

/// `XᵀWX` and `XᵀWy`, optionally on columns shifted by `center`.
fn weighted_normal_equations(
    x: &Matrix,
    y: &[f64],
    w: &[f64],
    center: Option<(&[f64], f64)>,
) -> (DMatrix<f64>, DVector<f64>) {
    let d = x.cols();
    let mut gram = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    let mut buf = vec![0.0; d];
    for ((row, &yi), &wi) in x.iter_rows().zip(y).zip(w) {
        if wi == 0.0 {
            continue;
        }
        let yc = match center {
            Some((mx, my)) => {
                for ((b, v), m) in buf.iter_mut().zip(row).zip(mx) {
                    *b = v - m;
                }
                yi - my
            }
            None => {
                buf.copy_from_slice(row);
                yi
            }
        };
        for a in 0..d {
            let wa = wi * buf[a];
            rhs[a] += wa * yc;
            for b in a..d {
                gram[(a, b)] += wa * buf[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    (gram, rhs)
}

fn bin_of(v: f64, q: &[f64; 3]) -> usize {
    q.iter().filter(|&&c| v > c).count()
}

/// Replaces each entry by 1 if it falls in the same quartile bin as ξ.
fn discretize_rows(x: &Matrix, xi: &[f64], quartiles: &[[f64; 3]]) -> Matrix {
    let home: Vec<usize> = xi.iter().zip(quartiles).map(|(v, q)| bin_of(*v, q)).collect();
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let src = x.row(i);
        for (j, o) in out.row_mut(i).iter_mut().enumerate() {
            *o = f64::from(u8::from(bin_of(src[j], &quartiles[j]) == home[j]));
        }
    }
    out
}

/// Per-feature quartiles of a training matrix.
pub fn training_quartiles(x: &Matrix) -> Vec<[f64; 3]> {
    (0..x.cols())
        .map(|j| {
            let mut c = x.column(j);
            c.sort_by(f64::total_cmp);
            let q = |p: f64| {
                // Linear interpolation between order statistics.
                let h = p * (c.len() - 1) as f64;
                let lo = h.floor() as usize;
                let hi = h.ceil() as usize;
                c[lo] + (h - lo as f64) * (c[hi] - c[lo])
            };
            [q(0.25), q(0.5), q(0.75)]
        })
        .collect()
}

pub fn explain<M: BlackBox + ?Sized>(model: &M, xi: &[f64], cfg: &LimeConfig) -> Result<LimeExplanation> {
    let d = xi.len();
    if model.n_features() != d {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: d,
        });
    }
    cfg.validate(d)?;
    let nu = cfg.resolved_nu(d);
    let samples = sample_neighborhood(xi, cfg.n_samples, cfg.seed);
    let y = model.predict_rows(&samples);
    if let Some(bad) = y.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("model output {bad} on a LIME sample")));
    }
    let w = kernel_weights(xi, &samples, nu);
    let design = if cfg.discretize {
        let q = cfg.quartiles.clone().unwrap_or_else(|| vec![NORMAL_QUARTILES; d]);
        discretize_rows(&samples, xi, &q)
    } else {
        samples
    };
    let w_sum: f64 = w.iter().sum();
    let underflowed = w_sum == 0.0;
    let (coefficients, intercept) = if underflowed {
        (vec![0.0; d], 0.0)
    } else if cfg.fit_intercept {
        let mut mx = vec![0.0; d];
        let mut my = 0.0;
        for ((row, yi), wi) in design.iter_rows().zip(&y).zip(&w) {
            for (m, v) in mx.iter_mut().zip(row) {
                *m += wi * v;
            }
            my += wi * yi;
        }
        mx.iter_mut().for_each(|m| *m /= w_sum);
        my /= w_sum;
        let (gram, rhs) = weighted_normal_equations(&design, &y, &w, Some((&mx, my)));
        let u = ridge_solve(gram, rhs, cfg.ridge_lambda)?;
        let b = my - u.iter().zip(&mx).map(|(a, b)| a * b).sum::<f64>();
        (u, b)
    } else {
        let (gram, rhs) = weighted_normal_equations(&design, &y, &w, None);
        (ridge_solve(gram, rhs, cfg.ridge_lambda)?, 0.0)
    };
    if coefficients.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("LIME coefficients".into()));
    }
    Ok(LimeExplanation {
        coefficients,
        intercept,
        instance: xi.to_vec(),
        config: cfg.clone(),
        weights_underflowed: underflowed,
    })
}

/// Mean of the explanations seeded `seed, seed+1, …, seed+n_seeds−1`.
pub fn explain_averaged<M: BlackBox + ?Sized>(
    model: &M,
    xi: &[f64],
    cfg: &LimeConfig,
    n_seeds: usize,
) -> Result<LimeExplanation> {
    if n_seeds == 0 {
        return Err(Error::config("n_seeds", "must be at least 1"));
    }
    let mut coef = vec![0.0; xi.len()];
    let mut intercept = 0.0;
    let mut underflowed = false;
    for s in 0..n_seeds as u64 {
        let c = LimeConfig {
            seed: cfg.seed.wrapping_add(s),
            ..cfg.clone()
        };
        let e = explain(model, xi, &c)?;
        for (a, b) in coef.iter_mut().zip(&e.coefficients) {
            *a += b;
        }
        intercept += e.intercept;
        underflowed |= e.weights_underflowed;
    }
    let k = n_seeds as f64;
    coef.iter_mut().for_each(|v| *v /= k);
    Ok(LimeExplanation {
        coefficients: coef,
        intercept: intercept / k,
        instance: xi.to_vec(),
        config: cfg.clone(),
        weights_underflowed: underflowed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::{FnModel, LinearModel};

    #[test]
    fn kernel_at_the_instance_and_at_two_nu_squared() {
        let x = Matrix::from_rows(&[vec![1.0, 2.0], vec![1.0 + 2f64.sqrt() * 0.5, 2.0]]).unwrap();
        let w = kernel_weights(&[1.0, 2.0], &x, 0.5);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn tiny_bandwidth_underflows() {
        let x = Matrix::from_rows(&[vec![5f64.sqrt()]]).unwrap();
        assert_eq!(kernel_weights(&[0.0], &x, 1e-3), vec![0.0]);
    }

    #[test]
    fn constant_model_gets_zero_coefficients() {
        let m = FnModel::new(3, |_: &[f64]| 0.7);
        for fit_intercept in [true, false] {
            let cfg = LimeConfig {
                fit_intercept,
                seed: 4,
                ..Default::default()
            };
            let e = explain(&m, &[0.1, -0.3, 1.0], &cfg).unwrap();
            // Without an intercept the constant leaks into û; only the
            // centered fit removes it.
            if fit_intercept {
                assert!(e.coefficients.iter().all(|c| c.abs() < 1e-9));
                assert!((e.intercept - 0.7).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn all_underflow_returns_pure_penalty_solution() {
        let m = LinearModel::new(vec![1.0, -2.0], 0.0);
        let cfg = LimeConfig::with_nu_n(1e-3, 1000);
        let e = explain(&m, &[0.2, 0.3], &cfg).unwrap();
        assert!(e.weights_underflowed);
        assert!(e.coefficients.iter().all(|c| c.abs() <= 1e-6));
    }

    #[test]
    fn averaging_one_seed_is_explain() {
        let m = LinearModel::new(vec![1.0, -2.0, 0.5], 0.3);
        let cfg = LimeConfig {
            seed: 11,
            ..Default::default()
        };
        let a = explain(&m, &[0.2, 0.3, -1.0], &cfg).unwrap();
        let b = explain_averaged(&m, &[0.2, 0.3, -1.0], &cfg, 1).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
    }

    #[test]
    fn quartile_bins() {
        let q = [-1.0, 0.0, 1.0];
        assert_eq!(bin_of(-2.0, &q), 0);
        assert_eq!(bin_of(-1.0, &q), 0);
        assert_eq!(bin_of(0.5, &q), 2);
        assert_eq!(bin_of(3.0, &q), 3);
    }

    #[test]
    fn training_quartiles_interpolate() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![5.0]]).unwrap();
        assert_eq!(training_quartiles(&x), vec![[2.0, 3.0, 4.0]]);
    }
}
