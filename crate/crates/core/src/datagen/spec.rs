//! Feature specifications and structural equations.

use std::collections::HashMap;

use rand::Rng as _;
use rand_distr::{Distribution as _, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::sigmoid;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Continuous,
    Binary,
    CategoricalOneHot,
}

/// Marginal distribution of an exogenous feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case")]
pub enum Distribution {
    Uniform {
        low: f64,
        high: f64,
    },
    Normal {
        mean: f64,
        sd: f64,
    },
    Bernoulli {
        p: f64,
    },
    /// Levels are kept in alphabetical order; `weights` follow that order.
    Categorical {
        levels: Vec<String>,
        weights: Vec<f64>,
    },
}

impl Distribution {
    pub fn categorical(levels: &[&str]) -> Self {
        let mut levels: Vec<String> = levels.iter().map(|s| s.to_string()).collect();
        levels.sort();
        let w = 1.0 / levels.len() as f64;
        Distribution::Categorical {
            weights: vec![w; levels.len()],
            levels,
        }
    }

    /// Draws one value; categorical draws return the level index.
    fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            Distribution::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            Distribution::Normal { mean, sd } => mean + sd * standard_normal(rng),
            Distribution::Bernoulli { p } => f64::from(u8::from(rng.random::<f64>() < *p)),
            Distribution::Categorical { weights, .. } => {
                let total: f64 = weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (i, w) in weights.iter().enumerate() {
                    if u < *w {
                        return i as f64;
                    }
                    u -= w;
                }
                (weights.len() - 1) as f64
            }
        }
    }
}

pub(crate) fn standard_normal(rng: &mut Rng) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").sample(rng)
}

/// How a feature's raw value is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum SamplingRule {
    Exogenous(Distribution),
    /// `intercept + Σ w·parent + N(0, noise_sd²)` in raw units.
    Affine {
        intercept: f64,
        terms: Vec<(String, f64)>,
        noise_sd: f64,
    },
    /// Bernoulli with success probability `σ(intercept + Σ w·parent + ε)`,
    /// `ε ~ N(0, noise_sd²)`.
    BernoulliLogit {
        intercept: f64,
        terms: Vec<(String, f64)>,
        noise_sd: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub rule: SamplingRule,
    /// Unobserved features take part in label generation but are dropped
    /// from the dataset handed to models.
    pub observed: bool,
}

impl FeatureSpec {
    pub fn exogenous(name: &str, kind: FeatureKind, dist: Distribution) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind,
            rule: SamplingRule::Exogenous(dist),
            observed: true,
        }
    }

    pub fn continuous(name: &str, dist: Distribution) -> Self {
        Self::exogenous(name, FeatureKind::Continuous, dist)
    }

    pub fn binary(name: &str, p: f64) -> Self {
        Self::exogenous(name, FeatureKind::Binary, Distribution::Bernoulli { p })
    }

    pub fn categorical(name: &str, levels: &[&str]) -> Self {
        Self::exogenous(name, FeatureKind::CategoricalOneHot, Distribution::categorical(levels))
    }

    pub fn affine(name: &str, intercept: f64, terms: &[(&str, f64)], noise_sd: f64) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Continuous,
            rule: SamplingRule::Affine {
                intercept,
                terms: own_terms(terms),
                noise_sd,
            },
            observed: true,
        }
    }

    pub fn bernoulli_logit(name: &str, intercept: f64, terms: &[(&str, f64)], noise_sd: f64) -> Self {
        FeatureSpec {
            name: name.to_string(),
            kind: FeatureKind::Binary,
            rule: SamplingRule::BernoulliLogit {
                intercept,
                terms: own_terms(terms),
                noise_sd,
            },
            observed: true,
        }
    }

    pub fn hidden(mut self) -> Self {
        self.observed = false;
        self
    }

    pub fn depends_on(&self) -> Vec<&str> {
        match &self.rule {
            SamplingRule::Exogenous(_) => Vec::new(),
            SamplingRule::Affine { terms, .. } | SamplingRule::BernoulliLogit { terms, .. } => {
                terms.iter().map(|(n, _)| n.as_str()).collect()
            }
        }
    }

    /// Column names this feature expands to.
    pub fn columns(&self) -> Vec<String> {
        match (&self.kind, &self.rule) {
            (FeatureKind::CategoricalOneHot, SamplingRule::Exogenous(Distribution::Categorical { levels, .. })) => {
                levels.iter().map(|l| format!("{}_{}", self.name, l)).collect()
            }
            _ => vec![self.name.clone()],
        }
    }
}

fn own_terms(terms: &[(&str, f64)]) -> Vec<(String, f64)> {
    terms.iter().map(|(n, w)| (n.to_string(), *w)).collect()
}

/// A validated set of features in topological order, with the column
/// layout they expand to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructuralModel {
    pub features: Vec<FeatureSpec>,
    /// Evaluation order (indices into `features`).
    pub order: Vec<usize>,
    pub columns: Vec<String>,
    /// First column index of each feature.
    pub col_start: Vec<usize>,
    /// Resolved `(parent value column, weight)` terms per feature.
    parent_cols: Vec<Vec<(usize, f64)>>,
}

impl StructuralModel {
    pub fn new(features: Vec<FeatureSpec>) -> Result<Self> {
        let index: HashMap<&str, usize> = features.iter().enumerate().map(|(i, f)| (f.name.as_str(), i)).collect();
        if index.len() != features.len() {
            return Err(Error::config("features", "duplicate feature name"));
        }
        for f in &features {
            for p in f.depends_on() {
                let Some(&pi) = index.get(p) else {
                    return Err(Error::config(&f.name, format!("depends on unknown feature `{p}`")));
                };
                if features[pi].kind == FeatureKind::CategoricalOneHot {
                    return Err(Error::config(
                        &f.name,
                        format!("categorical parent `{p}` is not supported"),
                    ));
                }
            }
            if f.kind == FeatureKind::CategoricalOneHot
                && !matches!(f.rule, SamplingRule::Exogenous(Distribution::Categorical { .. }))
            {
                return Err(Error::config(&f.name, "categorical feature needs levels"));
            }
        }

        // Kahn's algorithm; ties resolved by declaration order.
        let n = features.len();
        let mut indegree = vec![0usize; n];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, f) in features.iter().enumerate() {
            for p in f.depends_on() {
                let pi = index[p];
                indegree[i] += 1;
                children[pi].push(i);
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut ready: Vec<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        while let Some(pos) = (!ready.is_empty()).then(|| {
            let m = *ready.iter().min().expect("non-empty");
            ready.iter().position(|&r| r == m).expect("present")
        }) {
            let i = ready.swap_remove(pos);
            order.push(i);
            for &c in &children[i] {
                indegree[c] -= 1;
                if indegree[c] == 0 {
                    ready.push(c);
                }
            }
        }
        if order.len() != n {
            return Err(Error::config("features", "dependency graph has a cycle"));
        }

        let mut columns = Vec::new();
        let mut col_start = Vec::with_capacity(n);
        for f in &features {
            col_start.push(columns.len());
            columns.extend(f.columns());
        }
        let parent_cols = features
            .iter()
            .map(|f| match &f.rule {
                SamplingRule::Exogenous(_) => Vec::new(),
                SamplingRule::Affine { terms, .. } | SamplingRule::BernoulliLogit { terms, .. } => {
                    terms.iter().map(|(p, w)| (col_start[index[p.as_str()]], *w)).collect()
                }
            })
            .collect();
        Ok(StructuralModel {
            features,
            order,
            columns,
            col_start,
            parent_cols,
        })
    }

    pub fn n_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// `(parent, child)` edges between feature names.
    pub fn edges(&self) -> Vec<(String, String)> {
        self.features
            .iter()
            .flat_map(|f| f.depends_on().into_iter().map(move |p| (p.to_string(), f.name.clone())))
            .collect()
    }

    /// Features reachable from `feature` through dependency edges.
    pub fn descendants(&self, feature: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![self.features[feature].name.as_str()];
        while let Some(name) = stack.pop() {
            for (i, f) in self.features.iter().enumerate() {
                if f.depends_on().contains(&name) && !out.contains(&i) {
                    out.push(i);
                    stack.push(f.name.as_str());
                }
            }
        }
        out
    }

    /// Per-column observed flag.
    pub fn observed_columns(&self) -> Vec<bool> {
        self.features
            .iter()
            .flat_map(|f| std::iter::repeat_n(f.observed, f.columns().len()))
            .collect()
    }

    /// Column index holding the raw value of a non-categorical feature.
    pub(crate) fn value_column(&self, feature: usize) -> usize {
        self.col_start[feature]
    }

    fn linear_part(&self, feature: usize, row: &[f64]) -> f64 {
        self.parent_cols[feature].iter().map(|&(c, w)| w * row[c]).sum()
    }

    /// Sample one full raw row (all columns, hidden ones included).
    ///
    /// Exogenous draws come from `features_rng`; structural noise from
    /// `structural_rng`. Both are consumed in a fixed order per row.
    pub fn sample_row(&self, features_rng: &mut Rng, structural_rng: &mut Rng) -> Vec<f64> {
        let mut row = vec![0.0; self.n_columns()];
        for &i in &self.order {
            let f = &self.features[i];
            let c = self.col_start[i];
            match &f.rule {
                SamplingRule::Exogenous(dist) => {
                    let v = dist.sample(features_rng);
                    if f.kind == FeatureKind::CategoricalOneHot {
                        row[c + v as usize] = 1.0;
                    } else {
                        row[c] = v;
                    }
                }
                SamplingRule::Affine {
                    intercept, noise_sd, ..
                } => {
                    let eps = noise_sd * standard_normal(structural_rng);
                    row[c] = intercept + self.linear_part(i, &row) + eps;
                }
                SamplingRule::BernoulliLogit {
                    intercept, noise_sd, ..
                } => {
                    let eps = noise_sd * standard_normal(structural_rng);
                    let p = sigmoid(intercept + self.linear_part(i, &row) + eps);
                    let u: f64 = structural_rng.random();
                    row[c] = f64::from(u8::from(u < p));
                }
            }
        }
        row
    }

    /// Recompute the descendants of `feature` in `row` as conditional
    /// expectations given the structural noise `eps` (one entry per
    /// feature). Bernoulli nodes are replaced by their success
    /// probability, which is exact for affine children.
    pub(crate) fn propagate_expected(&self, row: &mut [f64], eps: &[f64], descendants: &[usize]) {
        for &i in &self.order {
            if !descendants.contains(&i) {
                continue;
            }
            let f = &self.features[i];
            let c = self.col_start[i];
            match &f.rule {
                SamplingRule::Exogenous(_) => {}
                SamplingRule::Affine { intercept, .. } => {
                    row[c] = intercept + self.linear_part(i, row) + eps[i];
                }
                SamplingRule::BernoulliLogit { intercept, .. } => {
                    row[c] = sigmoid(intercept + self.linear_part(i, row) + eps[i]);
                }
            }
        }
    }

    /// Structural noise draws for every dependent feature (zero for
    /// exogenous ones).
    pub(crate) fn sample_noise(&self, rng: &mut Rng) -> Vec<f64> {
        self.features
            .iter()
            .map(|f| match &f.rule {
                SamplingRule::Exogenous(_) => 0.0,
                SamplingRule::Affine { noise_sd, .. } | SamplingRule::BernoulliLogit { noise_sd, .. } => {
                    noise_sd * standard_normal(rng)
                }
            })
            .collect()
    }
}

/// `E[σ(mean + ε)]`, `ε ~ N(0, sd²)`, by trapezoid quadrature over ±10 sd.
pub fn expected_sigmoid(mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return sigmoid(mean);
    }
    let n = 8000;
    let lo = -10.0;
    let step = 20.0 / n as f64;
    let mut acc = 0.0;
    for k in 0..=n {
        let z = lo + step * k as f64;
        let w = if k == 0 || k == n { 0.5 } else { 1.0 };
        acc += w * sigmoid(mean + sd * z) * (-0.5 * z * z).exp();
    }
    acc * step / (2.0 * std::f64::consts::PI).sqrt()
}
