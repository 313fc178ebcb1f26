//! Synthetic datasets with known ground truth.
//!
//! Every generator describes its features as a [`StructuralModel`], draws
//! raw rows from independent sub-streams of the master seed, splits 80/20,
//! standardizes on the training rows, and labels rows with
//! `Y = 1 iff σ(intercept + Σ coef·z + ε) ≥ 0.5` on the standardized
//! columns `z`.

mod dataset;
mod effects;
mod generators;
mod spec;

use serde::{Deserialize, Serialize};

pub use dataset::{fit_standardizer, standardize, Dataset, DatasetManifest, Split, DEFAULT_TEST_FRACTION};
pub use effects::{compute_marginal_effects, MarginalEffects, DEFAULT_MC_SAMPLES, DEFAULT_STEP};
pub use generators::{
    gen_loan_correlated, gen_loan_independent, gen_marketing, gen_random_linear, gen_scenario, generate,
    labels_from_raw, GeneratorId, LabelRule, ScenarioKind, LOAN_COEFFICIENTS, LOAN_INTERCEPT,
};
pub use spec::{expected_sigmoid, Distribution, FeatureKind, FeatureSpec, SamplingRule, StructuralModel};

/// Labels inside `|clean index| < half_width` are flipped with
/// probability `flip_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlipBand {
    pub half_width: f64,
    pub flip_prob: f64,
}

/// The hidden data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub generator: String,
    pub structure: StructuralModel,
    pub intercept: f64,
    /// Linear-index weights, one per column (hidden columns included),
    /// acting on standardized values.
    pub coefficients: Vec<f64>,
    pub noise_sd: f64,
    pub flip_band: Option<FlipBand>,
    /// Standardization statistics for every column (training split).
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Marginal effects on the standardized index scale.
    pub beta: Vec<f64>,
    pub beta_se: Vec<f64>,
}

impl GroundTruth {
    pub fn columns(&self) -> &[String] {
        &self.structure.columns
    }

    fn col(&self, name: &str) -> Option<usize> {
        self.structure.columns.iter().position(|c| c == name)
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.col(name).map(|j| self.coefficients[j])
    }

    pub fn beta_of(&self, name: &str) -> Option<f64> {
        self.col(name).map(|j| self.beta[j])
    }

    /// β restricted to the columns a model can see, in dataset order.
    pub fn observed_beta(&self) -> Vec<f64> {
        self.structure
            .observed_columns()
            .iter()
            .zip(&self.beta)
            .filter(|(o, _)| **o)
            .map(|(_, b)| *b)
            .collect()
    }

    pub fn edges(&self) -> Vec<(String, String)> {
        self.structure.edges()
    }

    /// Noise-free linear index for one standardized row (all columns).
    pub fn clean_index(&self, z: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(z).map(|(c, v)| c * v).sum::<f64>()
    }

    /// JSON summary stored next to serialized datasets.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "generator": self.generator,
            "columns": self.structure.columns,
            "observed": self.structure.observed_columns(),
            "intercept": self.intercept,
            "coefficients": self.coefficients,
            "noise_sd": self.noise_sd,
            "flip_band": self.flip_band,
            "means": self.means,
            "sds": self.sds,
            "beta": self.beta,
            "beta_se": self.beta_se,
            "dependency_edges": self.edges(),
            "one_hot_order": "alphabetical by level name",
        })
    }
}

/// A generated dataset together with its ground truth and the raw values
/// of every column (hidden ones included).
#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub dataset: Dataset,
    pub truth: GroundTruth,
    pub raw: crate::matrix::Matrix,
}
