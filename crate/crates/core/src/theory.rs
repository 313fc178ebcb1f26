//! Numerical checks of the ridge-operator analysis behind LIME: how far
//! `(XᵀWX + I)⁻¹XᵀWX` is from the identity, what the kernel weights do to
//! its conditioning, and how fast LIME's coefficients approach β.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng as _;
use rand_distr::{Distribution as _, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blackbox::LinearModel;
use crate::error::{Error, Result};
use crate::io::{Cell, Table};
use crate::lime::{self, LimeConfig};
use crate::linalg::{spd_inverse, spectral_norm};
use crate::matrix::Matrix;
use crate::rng;

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITER: usize = 10_000;

/// `XᵀWX` for rows drawn from N(ξ, I) with ξ ~ N(0, I), built without
/// storing X.
fn weighted_gram(nu: f64, n: usize, d: usize, seed: u64) -> DMatrix<f64> {
    let mut r_xi = rng::stream(seed, "theory-xi", 0);
    let xi: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut r_xi)).collect();
    let mut r = rng::stream(seed, "theory-rows", 0);
    let s = 2.0 * nu * nu;
    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut x = vec![0.0; d];
    for _ in 0..n {
        let mut d2 = 0.0;
        for (v, c) in x.iter_mut().zip(&xi) {
            let e: f64 = StandardNormal.sample(&mut r);
            *v = c + e;
            d2 += e * e;
        }
        let w = (-d2 / s).exp();
        if w == 0.0 {
            continue;
        }
        for a in 0..d {
            let wa = w * x[a];
            for b in a..d {
                gram[(a, b)] += wa * x[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    gram
}

/// `‖(A + I)⁻¹A − I‖₂` with `A = XᵀWX`, by power iteration.
pub fn operator_gap(nu: f64, n: usize, d: usize, seed: u64) -> Result<f64> {
    if d == 0 || n < d {
        return Err(Error::config("n, d", "need n >= d >= 1"));
    }
    if !(nu > 0.0) {
        return Err(Error::config("nu", "must be positive"));
    }
    let a = weighted_gram(nu, n, d, seed);
    gap_of(&a)
}

fn gap_of(a: &DMatrix<f64>) -> Result<f64> {
    let d = a.nrows();
    let b = a + DMatrix::<f64>::identity(d, d);
    let b_inv = spd_inverse(&b)?;
    let op = &b_inv * a - DMatrix::<f64>::identity(d, d);
    let g = spectral_norm(&op, POWER_TOL, POWER_MAX_ITER);
    if !g.is_finite() {
        return Err(Error::NonFinite("operator gap".into()));
    }
    Ok(g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceGrid {
    pub nus: Vec<f64>,
    pub ns: Vec<usize>,
    pub ds: Vec<usize>,
    pub replicates: usize,
}

impl ConvergenceGrid {
    /// ν ∈ {0.1, 1, 10, 10⁴}, N ∈ {10, …, 10⁶}, D ∈ {5, 10, 100}.
    pub fn full() -> Self {
        ConvergenceGrid {
            nus: vec![0.1, 1.0, 10.0, 1e4],
            ns: vec![10, 100, 1000, 10_000, 1_000_000],
            ds: vec![5, 10, 100],
            replicates: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellStatus {
    Ok,
    /// N < D.
    Skipped,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub nu: f64,
    pub n: usize,
    pub d: usize,
    /// One entry per replicate; NaN where a replicate failed.
    pub gaps: Vec<f64>,
    pub mean_gap: f64,
    pub status: CellStatus,
}

pub fn run_grid(grid: &ConvergenceGrid, master_seed: u64) -> Vec<GridCell> {
    let mut cells = Vec::new();
    for &nu in &grid.nus {
        for &n in &grid.ns {
            for &d in &grid.ds {
                cells.push((nu, n, d));
            }
        }
    }
    cells
        .par_iter()
        .enumerate()
        .map(|(ci, &(nu, n, d))| {
            if n < d {
                return GridCell {
                    nu,
                    n,
                    d,
                    gaps: Vec::new(),
                    mean_gap: f64::NAN,
                    status: CellStatus::Skipped,
                };
            }
            let mut err = None;
            let gaps: Vec<f64> = (0..grid.replicates)
                .map(|r| {
                    let seed = rng::derive_seed(master_seed, "theory-cell", (ci * 1000 + r) as u64);
                    operator_gap(nu, n, d, seed).unwrap_or_else(|e| {
                        err.get_or_insert(e.to_string());
                        f64::NAN
                    })
                })
                .collect();
            let ok: Vec<f64> = gaps.iter().copied().filter(|g| g.is_finite()).collect();
            GridCell {
                nu,
                n,
                d,
                mean_gap: crate::matrix::mean(&ok),
                gaps,
                status: err.map_or(CellStatus::Ok, CellStatus::Failed),
            }
        })
        .collect()
}

pub fn replicate_table(cells: &[GridCell]) -> Table {
    let mut t = Table::new(["nu", "n", "d", "replicate", "gap"]);
    for c in cells {
        for (r, g) in c.gaps.iter().enumerate() {
            t.push(vec![c.nu.into(), c.n.into(), c.d.into(), r.into(), (*g).into()]);
        }
    }
    t
}

pub fn summary_table(cells: &[GridCell]) -> Table {
    let mut t = Table::new(["nu", "n", "d", "mean_gap", "status"]);
    for c in cells {
        let status: Cell = match &c.status {
            CellStatus::Ok => "ok".into(),
            CellStatus::Skipped => "skipped-n-below-d".into(),
            CellStatus::Failed(e) => format!("failed: {}", e.replace(',', ";")).into(),
        };
        t.push(vec![c.nu.into(), c.n.into(), c.d.into(), c.mean_gap.into(), status]);
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionDiagnostics {
    pub sigma_min_w: f64,
    /// max w / min w; infinite if some weight is zero.
    pub kappa_w: f64,
    /// `((σmax(X)^{2D} + σmax(X)²) / σmin(X)^{2D}) / σmin(W)^D`.
    pub bound: f64,
    /// `‖(XᵀWX + I)⁻¹XᵀWX‖₂`.
    pub observed: f64,
}

/// Weight conditioning and the norm bound for a fixed design and weights.
pub fn condition_diagnostics(x: &Matrix, w: &[f64]) -> Result<ConditionDiagnostics> {
    if w.len() != x.rows() {
        return Err(Error::DimensionMismatch {
            expected: x.rows(),
            got: w.len(),
        });
    }
    if w.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(Error::config("w", "weights must be finite and non-negative"));
    }
    let d = x.cols();
    let w_min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let w_max = w.iter().copied().fold(0.0, f64::max);
    let kappa_w = if w_min == 0.0 { f64::INFINITY } else { w_max / w_min };

    let xm = DMatrix::from_row_slice(x.rows(), d, x.as_slice());
    let xtx = xm.transpose() * &xm;
    let eig = SymmetricEigen::new(xtx).eigenvalues;
    let s_max = eig.max().max(0.0).sqrt();
    let s_min = eig.min().max(0.0).sqrt();
    let dd = 2 * d as i32;
    let bound = (s_max.powi(dd) + s_max * s_max) / s_min.powi(dd) / w_min.powi(d as i32);

    let mut a = DMatrix::<f64>::zeros(d, d);
    for (row, &wi) in x.iter_rows().zip(w) {
        for p in 0..d {
            for q in 0..d {
                a[(p, q)] += wi * row[p] * row[q];
            }
        }
    }
    let b_inv = spd_inverse(&(&a + DMatrix::<f64>::identity(d, d)))?;
    let observed = spectral_norm(&(b_inv * a), POWER_TOL, POWER_MAX_ITER);
    Ok(ConditionDiagnostics {
        sigma_min_w: w_min,
        kappa_w,
        // 0/0 or ∞/∞ would read as no bound at all.
        bound: if bound.is_nan() { f64::INFINITY } else { bound },
        observed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n: usize,
    /// Replicate mean of `max_j |û_j − β_j|`.
    pub mean_max_error: f64,
    pub errors: Vec<f64>,
}

/// LIME without intercept or discretization on `f(x) = βᵀx` with integer
/// β ∈ [−10, 10], explained at ξ ~ N(0, I), for increasing sample sizes.
/// Each replicate draws fresh β, ξ and samples.
pub fn lime_convergence(
    d: usize,
    ns: &[usize],
    nu: f64,
    lambda: f64,
    replicates: usize,
    seed: u64,
) -> Result<Vec<ConvergencePoint>> {
    ns.iter()
        .map(|&n| {
            let errors = (0..replicates as u64)
                .into_par_iter()
                .map(|r| {
                    let mut g = rng::stream(seed, "convergence-setup", r);
                    let beta: Vec<f64> = (0..d).map(|_| f64::from(g.random_range(-10..=10))).collect();
                    let xi: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut g)).collect();
                    let model = LinearModel::new(beta.clone(), 0.0);
                    let cfg = LimeConfig {
                        nu: Some(nu),
                        n_samples: n,
                        ridge_lambda: lambda,
                        fit_intercept: false,
                        seed: rng::derive_seed(seed, "convergence-samples", r * 1_000_003 + n as u64),
                        ..Default::default()
                    };
                    let e = lime::explain(&model, &xi, &cfg)?;
                    Ok(e.coefficients
                        .iter()
                        .zip(&beta)
                        .map(|(u, b)| (u - b).abs())
                        .fold(0.0, f64::max))
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(ConvergencePoint {
                n,
                mean_max_error: crate::matrix::mean(&errors),
                errors,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gap_matches_smallest_eigenvalue() {
        // (A+I)⁻¹A − I = −(A+I)⁻¹, so the gap is 1/(1 + λmin(A)).
        let a = weighted_gram(1.0, 200, 4, 3);
        let lmin = SymmetricEigen::new(a.clone()).eigenvalues.min();
        let g = gap_of(&a).unwrap();
        assert!((g - 1.0 / (1.0 + lmin)).abs() < 1e-9);
    }

    #[test]
    fn identity_weights_have_unit_condition() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0], vec![1.0, 1.0]]).unwrap();
        let c = condition_diagnostics(&x, &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(c.kappa_w, 1.0);
        assert!(c.bound >= c.observed);
    }

    #[test]
    fn weight_condition_number() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let c = condition_diagnostics(&x, &[1.0, (-10f64).exp()]).unwrap();
        assert!((c.kappa_w / 10f64.exp() - 1.0).abs() < 1e-12);
        let z = condition_diagnostics(&x, &[1.0, 0.0]).unwrap();
        assert!(z.kappa_w.is_infinite());
    }

    #[test]
    fn small_n_is_rejected() {
        assert!(operator_gap(1.0, 3, 5, 0).is_err());
    }
}
