//! Ways of combining several explanations into one: averaging over models
//! and explainer seeds, mixing SHAP with LIME, Borda voting, and the two
//! recommended end-to-end pipelines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blackbox::BlackBox;
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::lime::{self, LimeConfig};
use crate::matrix::Matrix;
use crate::models::{self, MlpModel, SweepResult, TrainConfig};
use crate::shap::{self, ShapConfig, ShapMethod, DEFAULT_EPS_DIV, MAX_EXACT_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregation {
    Mean,
    Borda,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExplainerCfg {
    /// LIME averaged over `n_seeds` consecutive seeds.
    Lime { cfg: LimeConfig, n_seeds: usize },
    /// SHAP, optionally divided by (ξ − background).
    Shap { cfg: ShapConfig, normalize: bool },
}

/// One importance vector for `xi`. Undefined normalized SHAP entries
/// come back as NaN.
pub fn explain_with<M: BlackBox + ?Sized>(model: &M, cfg: &ExplainerCfg, xi: &[f64]) -> Result<Vec<f64>> {
    match cfg {
        ExplainerCfg::Lime { cfg, n_seeds } => Ok(lime::explain_averaged(model, xi, cfg, *n_seeds)?.coefficients),
        ExplainerCfg::Shap { cfg, normalize } => {
            let e = match cfg.method {
                ShapMethod::Exact => shap::shap_exact(model, xi, cfg)?,
                _ => shap::shap_sampled(model, xi, cfg)?,
            };
            if *normalize {
                let bg = cfg.background.clone().unwrap_or_else(|| vec![0.0; xi.len()]);
                Ok(shap::normalize_shap(&e, xi, &bg, DEFAULT_EPS_DIV)?.values)
            } else {
                Ok(e.phi)
            }
        }
    }
}

pub struct EnsembleSpec<'a, M: BlackBox> {
    pub models: &'a [M],
    pub explainers: &'a [ExplainerCfg],
    pub aggregation: Aggregation,
    pub max_normalize_before_mix: bool,
}

/// Divides by the largest |entry|; all-zero (or all-undefined) vectors
/// are returned unchanged.
pub fn max_normalize(v: &[f64]) -> Vec<f64> {
    let m = v.iter().filter(|x| x.is_finite()).fold(0.0_f64, |a, x| a.max(x.abs()));
    if m == 0.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / m).collect()
    }
}

fn elementwise_mean(vs: &[Vec<f64>]) -> Vec<f64> {
    let d = vs[0].len();
    let mut acc = vec![0.0; d];
    for v in vs {
        for (a, x) in acc.iter_mut().zip(v) {
            *a += x;
        }
    }
    acc.iter().map(|a| a / vs.len() as f64).collect()
}

/// Ranking (best first) by descending signed importance, ties by index.
fn ranking_of(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
    idx
}

/// Aggregates the B×E explanations of `xi`. With Borda aggregation the
/// result holds each feature's point total.
pub fn average_over_models<M: BlackBox>(spec: &EnsembleSpec<'_, M>, xi: &[f64]) -> Result<Vec<f64>> {
    if spec.models.is_empty() || spec.explainers.is_empty() {
        return Err(Error::config("ensemble", "needs at least one model and one explainer"));
    }
    let d = spec.models[0].n_features();
    if let Some(m) = spec.models.iter().find(|m| m.n_features() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: m.n_features(),
        });
    }
    let mut all = Vec::with_capacity(spec.models.len() * spec.explainers.len());
    for m in spec.models {
        for e in spec.explainers {
            let v = explain_with(m, e, xi)?;
            all.push(if spec.max_normalize_before_mix {
                max_normalize(&v)
            } else {
                v
            });
        }
    }
    match spec.aggregation {
        Aggregation::Mean => Ok(elementwise_mean(&all)),
        Aggregation::Borda => {
            let ballots: Vec<Vec<usize>> = all.iter().map(|v| ranking_of(v)).collect();
            let points = borda_points(&ballots)?;
            Ok(points.into_iter().map(|p| p as f64).collect())
        }
    }
}

/// Max-normalizes both vectors, then averages them.
pub fn average_shap_lime(shap_e: &[f64], lime_e: &[f64]) -> Result<Vec<f64>> {
    if shap_e.len() != lime_e.len() {
        return Err(Error::DimensionMismatch {
            expected: shap_e.len(),
            got: lime_e.len(),
        });
    }
    Ok(elementwise_mean(&[max_normalize(shap_e), max_normalize(lime_e)]))
}

/// Point totals per candidate: rank r of D earns D − r + 1.
pub fn borda_points(rankings: &[Vec<usize>]) -> Result<Vec<usize>> {
    let first = rankings
        .first()
        .ok_or_else(|| Error::MalformedRanking("no ballots".into()))?;
    let d = first.len();
    let mut points = vec![0usize; d];
    for (b, r) in rankings.iter().enumerate() {
        let mut seen = vec![false; d];
        if r.len() != d {
            return Err(Error::MalformedRanking(format!(
                "ballot {b} ranks {} candidates, expected {d}",
                r.len()
            )));
        }
        for (pos, &c) in r.iter().enumerate() {
            if c >= d || seen[c] {
                return Err(Error::MalformedRanking(format!(
                    "ballot {b} is not a permutation of 0..{d}"
                )));
            }
            seen[c] = true;
            points[c] += d - pos;
        }
    }
    Ok(points)
}

/// Aggregate ranking, best first, ties by candidate index.
pub fn borda_aggregate(rankings: &[Vec<usize>]) -> Result<Vec<usize>> {
    let points = borda_points(rankings)?;
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[b].cmp(&points[a]).then(a.cmp(&b)));
    Ok(idx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    ShapTrack,
    LimeTrack,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Number of test rows explained (the first `m` of the test split).
    pub m: usize,
    pub hidden_grid: Vec<usize>,
    pub seed_grid: Vec<u64>,
    pub epsilon_auc: f64,
    pub n_models: usize,
    pub sweep_epochs: usize,
    pub train: TrainConfig,
    pub lime_nu: f64,
    pub lime_samples: usize,
    pub lime_seeds: usize,
    pub shap_permutations: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 0,
            m: 100,
            hidden_grid: models::default_hidden_grid(),
            seed_grid: (1..=10).collect(),
            epsilon_auc: 0.02,
            n_models: 10,
            sweep_epochs: 30,
            train: TrainConfig::minibatch(),
            lime_nu: 10_000.0,
            lime_samples: 10_000,
            lime_seeds: 10,
            shap_permutations: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    /// `m × D` importances for the explained test rows.
    pub explanations: Matrix,
    /// Row indices (into the full dataset) of the explained instances.
    pub instances: Vec<usize>,
    pub models: Vec<MlpModel>,
    pub explainers: Vec<ExplainerCfg>,
    /// Number of explanations averaged per instance.
    pub explainers_per_instance: usize,
    pub manifest: serde_json::Value,
}

pub fn recommended_pipeline(ds: &Dataset, strategy: Strategy, cfg: &PipelineConfig) -> Result<PipelineOutput> {
    let count = match strategy {
        Strategy::LimeTrack => cfg.n_models,
        Strategy::ShapTrack => 1,
    };
    let sweep = models::complexity_sweep(
        ds,
        &cfg.hidden_grid,
        &cfg.seed_grid,
        cfg.epsilon_auc,
        count,
        &cfg.train,
        cfg.sweep_epochs,
    )?;
    pipeline_from_sweep(ds, strategy, cfg, &sweep)
}

/// The explanation half of [`recommended_pipeline`] for an existing sweep.
/// The SHAP track uses only the first (simplest) selected model.
pub fn pipeline_from_sweep(
    ds: &Dataset,
    strategy: Strategy,
    cfg: &PipelineConfig,
    sweep: &SweepResult,
) -> Result<PipelineOutput> {
    let models: Vec<MlpModel> = match strategy {
        Strategy::LimeTrack => sweep.selected.iter().take(cfg.n_models).cloned().collect(),
        Strategy::ShapTrack => sweep.selected.iter().take(1).cloned().collect(),
    };
    let d = ds.n_features();
    let explainer = match strategy {
        Strategy::LimeTrack => ExplainerCfg::Lime {
            cfg: LimeConfig {
                nu: Some(cfg.lime_nu),
                n_samples: cfg.lime_samples,
                seed: cfg.seed,
                ..Default::default()
            },
            n_seeds: cfg.lime_seeds,
        },
        Strategy::ShapTrack => ExplainerCfg::Shap {
            cfg: ShapConfig {
                method: if d <= MAX_EXACT_FEATURES {
                    ShapMethod::Exact
                } else {
                    ShapMethod::PermutationSampling
                },
                background: Some(ds.train_means()),
                n_permutations: cfg.shap_permutations,
                seed: cfg.seed,
            },
            normalize: true,
        },
    };
    let explainers = vec![explainer];
    let per_instance = models.len()
        * match &explainers[0] {
            ExplainerCfg::Lime { n_seeds, .. } => *n_seeds,
            ExplainerCfg::Shap { .. } => 1,
        };
    let instances = explained_instances(ds, cfg.m);
    let spec = EnsembleSpec {
        models: &models,
        explainers: &explainers,
        aggregation: Aggregation::Mean,
        max_normalize_before_mix: false,
    };
    let rows: Vec<Vec<f64>> = instances
        .par_iter()
        .map(|&i| average_over_models(&spec, ds.x.row(i)))
        .collect::<Result<_>>()?;
    let explanations = Matrix::from_rows(&rows)?;
    let manifest = serde_json::json!({
        "strategy": strategy,
        "config": cfg,
        "best_auc": sweep.best_auc,
        "models": models.iter().map(|m| serde_json::json!({
            "hidden_nodes": m.hidden_nodes,
            "seed": m.seed,
            "test_auc": m.test_auc(),
        })).collect::<Vec<_>>(),
        "models_differ_by": "initialization seed and hidden layer size",
        "explainers": explainers,
        "explainers_per_instance": per_instance,
        "instances": instances,
    });
    Ok(PipelineOutput {
        explanations,
        instances,
        models,
        explainers,
        explainers_per_instance: per_instance,
        manifest,
    })
}

/// The first `m` test rows, as dataset row indices.
pub fn explained_instances(ds: &Dataset, m: usize) -> Vec<usize> {
    ds.split.test.iter().copied().take(m).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blackbox::LinearModel;

    #[test]
    fn borda_worked_example() {
        // A=0, B=1, C=2
        let ballots = vec![vec![0, 1, 2], vec![0, 2, 1], vec![1, 0, 2]];
        assert_eq!(borda_points(&ballots).unwrap(), vec![8, 6, 4]);
        assert_eq!(borda_aggregate(&ballots).unwrap(), vec![0, 1, 2]);
    }

    #[test]
    fn borda_rejects_non_permutations() {
        assert!(borda_aggregate(&[vec![0, 0, 1]]).is_err());
        assert!(borda_aggregate(&[vec![0, 1, 2], vec![0, 1]]).is_err());
        assert!(borda_aggregate(&[]).is_err());
    }

    #[test]
    fn shap_lime_mix_example() {
        assert_eq!(average_shap_lime(&[2.0, 1.0], &[4.0, 2.0]).unwrap(), vec![1.0, 0.5]);
        assert_eq!(average_shap_lime(&[0.0, 0.0], &[4.0, 2.0]).unwrap(), vec![0.5, 0.25]);
    }

    #[test]
    fn opposite_models_cancel() {
        let models = [
            LinearModel::new(vec![1.0, -2.0], 0.0),
            LinearModel::new(vec![-1.0, 2.0], 0.0),
        ];
        let explainers = [ExplainerCfg::Shap {
            cfg: ShapConfig::default(),
            normalize: false,
        }];
        let spec = EnsembleSpec {
            models: &models,
            explainers: &explainers,
            aggregation: Aggregation::Mean,
            max_normalize_before_mix: false,
        };
        assert_eq!(average_over_models(&spec, &[0.5, 0.25]).unwrap(), vec![0.0, 0.0]);
    }
}
