//! Shapley-value attributions with an interventional value function: a
//! coalition keeps ξ's values and every other feature is set to a single
//! background vector.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::blackbox::BlackBox;
use crate::error::{Error, Result};
use crate::rng;

pub const MAX_EXACT_FEATURES: usize = 20;
pub const DEFAULT_EPS_DIV: f64 = 1e-6;
pub const DEFAULT_PERMUTATIONS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapMethod {
    Exact,
    PermutationSampling,
    LinearClosedForm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapConfig {
    pub method: ShapMethod,
    /// Reference point; `None` is the origin, which is the training mean
    /// of standardized data.
    pub background: Option<Vec<f64>>,
    pub n_permutations: usize,
    pub seed: u64,
}

impl Default for ShapConfig {
    fn default() -> Self {
        ShapConfig {
            method: ShapMethod::Exact,
            background: None,
            n_permutations: DEFAULT_PERMUTATIONS,
            seed: 0,
        }
    }
}

impl ShapConfig {
    fn background(&self, d: usize) -> Result<Vec<f64>> {
        match &self.background {
            Some(b) if b.len() != d => Err(Error::DimensionMismatch {
                expected: d,
                got: b.len(),
            }),
            Some(b) => Ok(b.clone()),
            None => Ok(vec![0.0; d]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    pub phi: Vec<f64>,
    /// Model output at the background point.
    pub base_value: f64,
    pub instance: Vec<f64>,
    /// Per-feature standard errors (sampling path only).
    pub std_errors: Option<Vec<f64>>,
}

fn check_model<M: BlackBox + ?Sized>(model: &M, xi: &[f64]) -> Result<()> {
    if model.n_features() != xi.len() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: xi.len(),
        });
    }
    Ok(())
}

/// Exact enumeration over all 2^D coalitions.
pub fn shap_exact<M: BlackBox + ?Sized>(model: &M, xi: &[f64], cfg: &ShapConfig) -> Result<ShapExplanation> {
    check_model(model, xi)?;
    let d = xi.len();
    if d > MAX_EXACT_FEATURES {
        return Err(Error::TooManyFeatures {
            d,
            max: MAX_EXACT_FEATURES,
        });
    }
    let bg = cfg.background(d)?;
    let mut point = bg.clone();
    let v: Vec<f64> = (0u32..1 << d)
        .map(|mask| {
            for j in 0..d {
                point[j] = if mask >> j & 1 == 1 { xi[j] } else { bg[j] };
            }
            model.predict(&point)
        })
        .collect();

    // |S|!(D−|S|−1)!/D! for |S| = 0..D−1.
    let weights: Vec<f64> = (0..d)
        .map(|s| {
            let mut w = 1.0 / d as f64;
            // 1/(D·C(D−1, s))
            let mut c = 1.0;
            for k in 0..s {
                c = c * (d - 1 - k) as f64 / (k + 1) as f64;
            }
            w /= c;
            w
        })
        .collect();

    let mut phi = vec![0.0; d];
    for mask in 0u32..1 << d {
        let s = mask.count_ones() as usize;
        if s == d {
            continue;
        }
        for (j, p) in phi.iter_mut().enumerate() {
            if mask >> j & 1 == 0 {
                *p += weights[s] * (v[(mask | 1 << j) as usize] - v[mask as usize]);
            }
        }
    }
    Ok(ShapExplanation {
        phi,
        base_value: v[0],
        instance: xi.to_vec(),
        std_errors: None,
    })
}

/// Permutation-sampling estimate from antithetic pairs (a random order and
/// its reverse). `n_permutations` counts individual orders and is rounded
/// up to an even number.
pub fn shap_sampled<M: BlackBox + ?Sized>(model: &M, xi: &[f64], cfg: &ShapConfig) -> Result<ShapExplanation> {
    check_model(model, xi)?;
    if cfg.n_permutations == 0 {
        return Err(Error::config("n_permutations", "must be at least 1"));
    }
    let d = xi.len();
    let bg = cfg.background(d)?;
    let base = model.predict(&bg);
    let pairs = cfg.n_permutations.div_ceil(2);
    let mut r = rng::stream(cfg.seed, "shap-permutations", 0);
    let mut order: Vec<usize> = (0..d).collect();
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    let mut contrib = vec![0.0; d];
    let mut point = bg.clone();

    let mut walk = |ord: &mut dyn Iterator<Item = usize>, out: &mut [f64]| {
        point.copy_from_slice(&bg);
        let mut prev = base;
        for j in ord {
            point[j] = xi[j];
            let cur = model.predict(&point);
            out[j] = cur - prev;
            prev = cur;
        }
    };

    let mut back = vec![0.0; d];
    for _ in 0..pairs {
        order.shuffle(&mut r);
        walk(&mut order.iter().copied(), &mut contrib);
        walk(&mut order.iter().rev().copied(), &mut back);
        for j in 0..d {
            let m = 0.5 * (contrib[j] + back[j]);
            sum[j] += m;
            sum_sq[j] += m * m;
        }
    }
    let k = pairs as f64;
    let phi: Vec<f64> = sum.iter().map(|s| s / k).collect();
    let se = sum_sq
        .iter()
        .zip(&phi)
        .map(|(sq, m)| {
            if pairs < 2 {
                return f64::NAN;
            }
            let var = ((sq - k * m * m) / (k - 1.0)).max(0.0);
            (var / k).sqrt()
        })
        .collect();
    Ok(ShapExplanation {
        phi,
        base_value: base,
        instance: xi.to_vec(),
        std_errors: Some(se),
    })
}

/// Closed form for `f(x) = intercept + βᵀx`: φ_j = β_j(ξ_j − x̄_j).
pub fn shap_linear(beta: &[f64], intercept: f64, xi: &[f64], xbar: &[f64]) -> Result<ShapExplanation> {
    for v in [xi.len(), xbar.len()] {
        if v != beta.len() {
            return Err(Error::DimensionMismatch {
                expected: beta.len(),
                got: v,
            });
        }
    }
    let phi = beta
        .iter()
        .zip(xi.iter().zip(xbar))
        .map(|(b, (x, m))| b * (x - m))
        .collect();
    let base = intercept + beta.iter().zip(xbar).map(|(b, m)| b * m).sum::<f64>();
    Ok(ShapExplanation {
        phi,
        base_value: base,
        instance: xi.to_vec(),
        std_errors: None,
    })
}

/// Dispatches on `cfg.method`. The closed form needs a linear model, so it
/// is only reachable through [`shap_linear`].
pub fn explain<M: BlackBox + ?Sized>(model: &M, xi: &[f64], cfg: &ShapConfig) -> Result<ShapExplanation> {
    match cfg.method {
        ShapMethod::Exact => shap_exact(model, xi, cfg),
        ShapMethod::PermutationSampling => shap_sampled(model, xi, cfg),
        ShapMethod::LinearClosedForm => Err(Error::config(
            "method",
            "linear-closed-form needs coefficients; call shap_linear",
        )),
    }
}

/// φ_j / (ξ_j − x̄_j), or NaN with the mask set when the denominator is
/// within `eps_div` of zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedShap {
    pub values: Vec<f64>,
    pub undefined: Vec<bool>,
}

pub fn normalize_shap(expl: &ShapExplanation, xi: &[f64], xbar: &[f64], eps_div: f64) -> Result<NormalizedShap> {
    if !(eps_div > 0.0) {
        return Err(Error::config("eps_div", "must be positive"));
    }
    let d = expl.phi.len();
    for v in [xi.len(), xbar.len()] {
        if v != d {
            return Err(Error::DimensionMismatch { expected: d, got: v });
        }
    }
    let mut values = Vec::with_capacity(d);
    let mut undefined = Vec::with_capacity(d);
    for j in 0..d {
        let den = xi[j] - xbar[j];
        if den.abs() > eps_div {
            values.push(expl.phi[j] / den);
            undefined.push(false);
        } else {
            values.push(f64::NAN);
            undefined.push(true);
        }
    }
    Ok(NormalizedShap { values, undefined })
}

/// Elementwise mean of |φ| over explanations.
pub fn mean_abs_shap(explanations: &[ShapExplanation]) -> Result<Vec<f64>> {
    let first = explanations
        .first()
        .ok_or_else(|| Error::config("explanations", "must be non-empty"))?;
    let d = first.phi.len();
    let mut acc = vec![0.0; d];
    for e in explanations {
        if e.phi.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: e.phi.len(),
            });
        }
        for (a, p) in acc.iter_mut().zip(&e.phi) {
            *a += p.abs();
        }
    }
    let n = explanations.len() as f64;
    Ok(acc.into_iter().map(|a| a / n).collect())
}
