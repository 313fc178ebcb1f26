//! Alignment as a function of the number of features, over a family of
//! random linear datasets.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::gen_random_linear;
use crate::error::{Error, Result};
use crate::io::Table;
use crate::lime::{self, LimeConfig};
use crate::matrix::{mean, Matrix};
use crate::metrics::{self, DEFAULT_EPS1, DEFAULT_EPS2};
use crate::mitigate::explained_instances;
use crate::models::{self, accuracy, TrainConfig};
use crate::rng::{derive_seed, stream};
use crate::shap::{self, ShapConfig, ShapMethod};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub datasets: usize,
    pub d_min: usize,
    pub d_max: usize,
    /// When non-empty, dataset `i` uses `dims[i % dims.len()]` instead of a
    /// random dimension.
    pub dims: Vec<usize>,
    pub rows_min: usize,
    pub rows_max: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub train: TrainConfig,
    /// Test rows explained per dataset.
    pub m: usize,
    pub lime: LimeConfig,
    pub shap_permutations: usize,
    /// Exact SHAP up to this many features, permutation sampling above.
    pub exact_max_d: usize,
    pub relevance_k: usize,
    pub bins: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            datasets: 100,
            d_min: 3,
            d_max: 100,
            dims: Vec::new(),
            rows_min: 100,
            rows_max: 10_000,
            hidden: 20,
            epochs: 100,
            train: TrainConfig::default(),
            m: 50,
            lime: LimeConfig::default(),
            shap_permutations: 500,
            exact_max_d: shap::MAX_EXACT_FEATURES,
            relevance_k: 3,
            bins: 5,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.datasets == 0 {
            return Err(Error::config("sweep.datasets", "must be at least 1"));
        }
        if self.d_min < 2 || self.d_min > self.d_max {
            return Err(Error::config("sweep.d_min", "need 2 <= d_min <= d_max"));
        }
        if let Some(&d) = self.dims.iter().find(|&&d| d < 2) {
            return Err(Error::config("sweep.dims", format!("dimension {d} is below 2")));
        }
        if self.rows_min < 20 || self.rows_min > self.rows_max {
            return Err(Error::config("sweep.rows_min", "need 20 <= rows_min <= rows_max"));
        }
        if self.m == 0 {
            return Err(Error::config("sweep.m", "must be at least 1"));
        }
        if self.exact_max_d > shap::MAX_EXACT_FEATURES {
            return Err(Error::config(
                "sweep.exact_max_d",
                format!("at most {}", shap::MAX_EXACT_FEATURES),
            ));
        }
        if self.bins == 0 {
            return Err(Error::config("sweep.bins", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetScore {
    pub dataset: usize,
    pub d: usize,
    pub rows: usize,
    pub test_auc: f64,
    pub test_accuracy: f64,
    pub explainer: String,
    pub directionality: f64,
    pub concordance: f64,
    pub relevance: f64,
    pub relevance_k: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinScore {
    pub bin: usize,
    pub d_low: f64,
    pub d_high: f64,
    pub explainer: String,
    pub n_datasets: usize,
    pub directionality: f64,
    pub concordance: f64,
    pub relevance: f64,
}

fn finite_mean(v: &[f64]) -> f64 {
    let f: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if f.is_empty() {
        f64::NAN
    } else {
        mean(&f)
    }
}

fn shape(cfg: &SweepConfig, seed: u64, i: usize) -> (usize, usize) {
    let mut rng = stream(seed, "sweep-shape", i as u64);
    let d = if cfg.dims.is_empty() {
        rng.random_range(cfg.d_min..=cfg.d_max)
    } else {
        cfg.dims[i % cfg.dims.len()]
    };
    let rows = rng.random_range(cfg.rows_min..=cfg.rows_max);
    (d, rows)
}

fn score_dataset(cfg: &SweepConfig, seed: u64, i: usize) -> Result<[DatasetScore; 2]> {
    let (d, rows) = shape(cfg, seed, i);
    let g = gen_random_linear(d, rows, derive_seed(seed, "sweep-data", i as u64))?;
    let ds = &g.dataset;
    let model = models::train_epochs(
        ds,
        cfg.hidden,
        &cfg.train,
        cfg.epochs,
        derive_seed(seed, "sweep-model", i as u64),
    )?;
    let probs = model.predict_proba(&ds.test_x())?;
    let acc = accuracy(&probs, &ds.test_y(), 0.5);
    let auc = model.test_auc().unwrap_or(f64::NAN);

    let instances = explained_instances(ds, cfg.m);
    let lime_seed = derive_seed(seed, "sweep-lime", i as u64);
    let shap_cfg = ShapConfig {
        method: if d <= cfg.exact_max_d {
            ShapMethod::Exact
        } else {
            ShapMethod::PermutationSampling
        },
        background: Some(ds.train_means()),
        n_permutations: cfg.shap_permutations,
        seed: derive_seed(seed, "sweep-shap", i as u64),
    };
    let mut lime_rows = Vec::with_capacity(instances.len());
    let mut shap_rows = Vec::with_capacity(instances.len());
    for &r in &instances {
        let xi = ds.x.row(r);
        let lcfg = LimeConfig {
            seed: derive_seed(lime_seed, "instance", r as u64),
            ..cfg.lime.clone()
        };
        lime_rows.push(lime::explain(&model, xi, &lcfg)?.coefficients);
        let mut scfg = shap_cfg.clone();
        scfg.seed = derive_seed(shap_cfg.seed, "instance", r as u64);
        shap_rows.push(shap::explain(&model, xi, &scfg)?.phi);
    }

    let beta = g.truth.observed_beta();
    let k = cfg.relevance_k.min(d - 1).max(1);
    let mut out = Vec::with_capacity(2);
    for (name, rows_e) in [("lime", lime_rows), ("shap", shap_rows)] {
        let e = Matrix::from_rows(&rows_e)?;
        let rep = metrics::evaluate(&e, &beta, &ds.feature_names, &[k], DEFAULT_EPS1, DEFAULT_EPS2)?;
        out.push(DatasetScore {
            dataset: i,
            d,
            rows,
            test_auc: auc,
            test_accuracy: acc,
            explainer: name.to_string(),
            directionality: finite_mean(&rep.directionality),
            concordance: rep.concordance_mean,
            relevance: rep.relevance_summary[0].mean,
            relevance_k: k,
        });
    }
    let shap_score = out.pop().unwrap();
    let lime_score = out.pop().unwrap();
    Ok([lime_score, shap_score])
}

/// Scores every dataset of the sweep. Results are ordered by dataset index,
/// LIME before SHAP.
pub fn run_sweep(cfg: &SweepConfig, seed: u64) -> Result<Vec<DatasetScore>> {
    cfg.validate()?;
    let per: Vec<Result<[DatasetScore; 2]>> = (0..cfg.datasets)
        .into_par_iter()
        .map(|i| score_dataset(cfg, seed, i))
        .collect();
    let mut out = Vec::with_capacity(2 * cfg.datasets);
    for r in per {
        out.extend(r?);
    }
    Ok(out)
}

/// Equal-width bins of `[1, 100]`; a dimension on an inner edge goes to the
/// upper bin, 100 to the last.
pub fn bin_of(d: usize, bins: usize) -> usize {
    let width = 99.0 / bins as f64;
    (((d as f64 - 1.0) / width).floor().max(0.0) as usize).min(bins - 1)
}

pub fn bin_scores(scores: &[DatasetScore], bins: usize) -> Vec<BinScore> {
    let width = 99.0 / bins as f64;
    let mut out = Vec::new();
    for explainer in ["lime", "shap"] {
        for b in 0..bins {
            let members: Vec<&DatasetScore> = scores
                .iter()
                .filter(|s| s.explainer == explainer && bin_of(s.d, bins) == b)
                .collect();
            let col =
                |f: fn(&DatasetScore) -> f64| -> f64 { finite_mean(&members.iter().map(|s| f(s)).collect::<Vec<_>>()) };
            out.push(BinScore {
                bin: b,
                d_low: 1.0 + b as f64 * width,
                d_high: 1.0 + (b + 1) as f64 * width,
                explainer: explainer.to_string(),
                n_datasets: members.len(),
                directionality: col(|s| s.directionality),
                concordance: col(|s| s.concordance),
                relevance: col(|s| s.relevance),
            });
        }
    }
    out
}

pub fn dataset_table(scores: &[DatasetScore]) -> Table {
    let mut t = Table::new([
        "dataset",
        "d",
        "rows",
        "test_auc",
        "test_accuracy",
        "explainer",
        "directionality",
        "concordance",
        "relevance",
        "relevance_k",
    ])
    .comment("feeds: number-of-features figure, one row per dataset and explainer");
    for s in scores {
        t.push(vec![
            s.dataset.into(),
            s.d.into(),
            s.rows.into(),
            s.test_auc.into(),
            s.test_accuracy.into(),
            s.explainer.as_str().into(),
            s.directionality.into(),
            s.concordance.into(),
            s.relevance.into(),
            s.relevance_k.into(),
        ]);
    }
    t
}

pub fn bin_table(bins: &[BinScore]) -> Table {
    let mut t = Table::new([
        "bin",
        "d_low",
        "d_high",
        "explainer",
        "n_datasets",
        "directionality",
        "concordance",
        "relevance",
    ])
    .comment("feeds: number-of-features figure, means within equal-width bins of [1,100]");
    for b in bins {
        t.push(vec![
            b.bin.into(),
            b.d_low.into(),
            b.d_high.into(),
            b.explainer.as_str().into(),
            b.n_datasets.into(),
            b.directionality.into(),
            b.concordance.into(),
            b.relevance.into(),
        ]);
    }
    t
}
