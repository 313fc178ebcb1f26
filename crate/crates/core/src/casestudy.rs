//! Home-loan approval case study: a logistic ground truth with twelve
//! named features, a CSV loader with range checks, a synthetic stand-in,
//! and the baseline-versus-mitigated comparison.

use std::path::Path;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::{fit_standardizer, standardize, Dataset, DatasetManifest, Split, DEFAULT_TEST_FRACTION};
use crate::error::{Error, Result};
use crate::lime::{self, LimeConfig};
use crate::matrix::{sigmoid, Matrix};
use crate::metrics::{self, AlignmentReport, DEFAULT_EPS1, DEFAULT_EPS2};
use crate::mitigate::{self, PipelineConfig, Strategy};
use crate::models;
use crate::rng;
use crate::shap::{self, ShapConfig};
use crate::stats::{self, ImprovementVerdict, DEFAULT_ALPHA};

pub const INTERCEPT: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Range {
    Binary,
    /// Integers 0..=max.
    Ordinal {
        max: u32,
    },
    Interval {
        low: i32,
        high: i32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CaseFeature {
    pub name: &'static str,
    pub meaning: &'static str,
    pub range: Range,
    pub coefficient: f64,
}

/// Column order used everywhere in this module.
pub const FEATURES: [CaseFeature; 12] = [
    CaseFeature {
        name: "good_credit",
        meaning: "credit history meets guidelines",
        range: Range::Binary,
        coefficient: 3.5,
    },
    CaseFeature {
        name: "purchaser_type",
        meaning: "type of purchaser of loan",
        range: Range::Ordinal { max: 9 },
        coefficient: 4.7,
    },
    CaseFeature {
        name: "pmi_approved",
        meaning: "approved for private mortgage insurance",
        range: Range::Binary,
        coefficient: -4.4,
    },
    CaseFeature {
        name: "multi_family",
        meaning: "purchasing a 2-4 family home",
        range: Range::Binary,
        coefficient: -0.4,
    },
    CaseFeature {
        name: "unver",
        meaning: "unverifiable information",
        range: Range::Binary,
        coefficient: -2.5,
    },
    CaseFeature {
        name: "fixed_rate",
        meaning: "fixed rather than adjustable rate",
        range: Range::Binary,
        coefficient: 0.9,
    },
    CaseFeature {
        name: "bankruptcy",
        meaning: "filed bankruptcy",
        range: Range::Binary,
        coefficient: -1.4,
    },
    CaseFeature {
        name: "value_rate",
        meaning: "tract rent-to-value ratio above the city median",
        range: Range::Binary,
        coefficient: -0.9,
    },
    CaseFeature {
        name: "debt_rate",
        meaning: "housing expenses and other obligations as a percentage of income",
        range: Range::Interval { low: 0, high: 100 },
        coefficient: -0.03,
    },
    CaseFeature {
        name: "old",
        meaning: "applicant age above the city median",
        range: Range::Binary,
        coefficient: -0.7,
    },
    CaseFeature {
        name: "married",
        meaning: "applicant married",
        range: Range::Binary,
        coefficient: 0.8,
    },
    CaseFeature {
        name: "gift",
        meaning: "gift as down payment",
        range: Range::Binary,
        coefficient: -0.8,
    },
];

pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EconGroundTruth {
    pub intercept: f64,
    pub features: Vec<CaseFeature>,
    /// True when the rows were simulated rather than loaded.
    pub synthetic: bool,
}

impl Default for EconGroundTruth {
    fn default() -> Self {
        EconGroundTruth {
            intercept: INTERCEPT,
            features: FEATURES.to_vec(),
            synthetic: false,
        }
    }
}

impl EconGroundTruth {
    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.to_string()).collect()
    }

    pub fn beta(&self) -> Vec<f64> {
        self.features.iter().map(|f| f.coefficient).collect()
    }

    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.features.iter().find(|f| f.name == name).map(|f| f.coefficient)
    }

    /// Logistic index on raw feature values.
    pub fn index(&self, raw: &[f64]) -> f64 {
        self.intercept + self.beta().iter().zip(raw).map(|(b, x)| b * x).sum::<f64>()
    }
}

fn check_range(range: Range, v: f64) -> std::result::Result<(), String> {
    let ok = match range {
        Range::Binary => v == 0.0 || v == 1.0,
        Range::Ordinal { max } => v.fract() == 0.0 && (0.0..=f64::from(max)).contains(&v),
        Range::Interval { low, high } => (f64::from(low)..=f64::from(high)).contains(&v),
    };
    if ok {
        Ok(())
    } else {
        Err(match range {
            Range::Binary => format!("{v} is not 0 or 1"),
            Range::Ordinal { max } => format!("{v} is not an integer in 0..={max}"),
            Range::Interval { low, high } => format!("{v} outside [{low}, {high}]"),
        })
    }
}

fn build_dataset(raw: Matrix, y: Vec<u8>, seed: u64, generator: &str, notes: Vec<String>) -> Dataset {
    let split = Split::random(raw.rows(), DEFAULT_TEST_FRACTION, seed);
    let (means, sds) = fit_standardizer(&raw, &split.train);
    let x = standardize(&raw, &means, &sds);
    Dataset {
        feature_names: FEATURES.iter().map(|f| f.name.to_string()).collect(),
        x,
        y,
        feature_means: means,
        feature_sds: sds,
        split,
        manifest: DatasetManifest {
            generator: generator.to_string(),
            seed,
            n_rows: raw.rows(),
            notes,
        },
    }
}

/// Reads a CSV with one column per feature name plus `label` (0/1).
/// Extra columns are ignored. Rows are numbered from 0 after the header.
pub fn load_case_data(path: &Path, seed: u64) -> Result<(Dataset, EconGroundTruth)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let feature_cols: Vec<usize> = FEATURES.iter().map(|f| col(f.name)).collect::<Result<_>>()?;
    let label_col = col(LABEL_COLUMN)?;

    let mut data = Vec::new();
    let mut y = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse = |c: usize, name: &str| -> Result<f64> {
            let s = rec.get(c).unwrap_or("");
            s.parse::<f64>().map_err(|_| Error::Row {
                row,
                reason: format!("{name}: cannot parse `{s}`"),
            })
        };
        for (f, &c) in FEATURES.iter().zip(&feature_cols) {
            let v = parse(c, f.name)?;
            check_range(f.range, v).map_err(|reason| Error::Row {
                row,
                reason: format!("{}: {reason}", f.name),
            })?;
            data.push(v);
        }
        let l = parse(label_col, LABEL_COLUMN)?;
        check_range(Range::Binary, l).map_err(|reason| Error::Row {
            row,
            reason: format!("{LABEL_COLUMN}: {reason}"),
        })?;
        y.push(l as u8);
    }
    if y.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    let raw = Matrix::from_vec(y.len(), FEATURES.len(), data)?;
    let ds = build_dataset(
        raw,
        y,
        seed,
        "case-study-csv",
        vec![format!("loaded from {}", path.display())],
    );
    Ok((ds, EconGroundTruth::default()))
}

/// Simulated stand-in: binaries Bernoulli(1/2), purchaser type uniform on
/// 0..=9, debt rate uniform on [0, 100]; label 1 iff σ(index) ≥ 0.5.
pub fn synth_case_data(n_rows: usize, seed: u64) -> Result<(Dataset, EconGroundTruth)> {
    if n_rows < 2 {
        return Err(Error::config("n_rows", "need at least two rows"));
    }
    let truth = EconGroundTruth {
        synthetic: true,
        ..Default::default()
    };
    let mut r = rng::stream(seed, "case-features", 0);
    let mut raw = Matrix::zeros(n_rows, FEATURES.len());
    let mut y = Vec::with_capacity(n_rows);
    for i in 0..n_rows {
        let row = raw.row_mut(i);
        for (v, f) in row.iter_mut().zip(&FEATURES) {
            *v = match f.range {
                Range::Binary => f64::from(u8::from(r.random_bool(0.5))),
                Range::Ordinal { max } => f64::from(r.random_range(0..=max)),
                Range::Interval { low, high } => r.random_range(f64::from(low)..=f64::from(high)),
            };
        }
        y.push(u8::from(sigmoid(truth.index(row)) >= 0.5));
    }
    let ds = build_dataset(
        raw,
        y,
        seed,
        "case-study-synthetic",
        vec!["synthetic fallback: simulated features, not the real home-loan records".into()],
    );
    Ok((ds, truth))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseStudyConfig {
    pub pipeline: PipelineConfig,
    /// Hidden nodes of the single baseline network.
    pub baseline_hidden: usize,
    pub ks: Vec<usize>,
    pub alpha: f64,
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        CaseStudyConfig {
            pipeline: PipelineConfig::default(),
            baseline_hidden: 100,
            ks: vec![1, 2, 3, 4, 5],
            alpha: DEFAULT_ALPHA,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CaseStudyResult {
    pub baseline_shap: AlignmentReport,
    pub baseline_lime: AlignmentReport,
    pub mitigated_shap: AlignmentReport,
    pub mitigated_lime: AlignmentReport,
    pub shap_verdicts: [ImprovementVerdict; 3],
    pub lime_verdicts: [ImprovementVerdict; 3],
    pub instances: Vec<usize>,
    pub manifest: serde_json::Value,
}

/// Divides column j by the standardizer's sd_j.
pub fn per_raw_unit(e: &Matrix, sds: &[f64]) -> Matrix {
    let mut out = e.clone();
    for i in 0..e.rows() {
        for (j, sd) in sds.iter().enumerate() {
            out.set(i, j, e.get(i, j) / sd);
        }
    }
    out
}

/// Baseline: one network with `baseline_hidden` nodes, default SHAP and
/// default LIME. Mitigated: the two recommended pipelines sharing one
/// sweep. All four explain the same test rows.
pub fn run_case_study(
    ds: &Dataset,
    truth: &EconGroundTruth,
    cfg: &CaseStudyConfig,
    master_seed: u64,
) -> Result<CaseStudyResult> {
    let mut pcfg = cfg.pipeline.clone();
    pcfg.seed = master_seed;
    let baseline_seed = pcfg.seed_grid.first().copied().unwrap_or(1);
    let baseline = models::train_epochs(ds, cfg.baseline_hidden, &pcfg.train, pcfg.sweep_epochs, baseline_seed)?;
    let sweep = models::complexity_sweep(
        ds,
        &pcfg.hidden_grid,
        &pcfg.seed_grid,
        pcfg.epsilon_auc,
        pcfg.n_models,
        &pcfg.train,
        pcfg.sweep_epochs,
    )?;
    let lime_out = mitigate::pipeline_from_sweep(ds, Strategy::LimeTrack, &pcfg, &sweep)?;
    let shap_out = mitigate::pipeline_from_sweep(ds, Strategy::ShapTrack, &pcfg, &sweep)?;
    let instances = mitigate::explained_instances(ds, pcfg.m);

    let shap_cfg = ShapConfig {
        background: Some(ds.train_means()),
        seed: master_seed,
        ..Default::default()
    };
    let lime_cfg = LimeConfig {
        seed: master_seed,
        ..Default::default()
    };
    let base_rows: Vec<(Vec<f64>, Vec<f64>)> = instances
        .par_iter()
        .map(|&i| {
            let xi = ds.x.row(i);
            let s = shap::shap_exact(&baseline, xi, &shap_cfg)?.phi;
            let l = lime::explain(&baseline, xi, &lime_cfg)?.coefficients;
            Ok((s, l))
        })
        .collect::<Result<_>>()?;
    let (bs, bl): (Vec<_>, Vec<_>) = base_rows.into_iter().unzip();

    let names = truth.names();
    let beta = truth.beta();
    let report = |m: &Matrix| metrics::evaluate(m, &beta, &names, &cfg.ks, DEFAULT_EPS1, DEFAULT_EPS2);
    // β is per raw unit while the model sees standardized columns, so
    // per-unit explanations are rescaled before scoring. Plain SHAP values
    // are in output units already.
    let raw = |m: &Matrix| per_raw_unit(m, &ds.feature_sds);
    let baseline_shap = report(&Matrix::from_rows(&bs)?)?;
    let baseline_lime = report(&raw(&Matrix::from_rows(&bl)?))?;
    let mitigated_shap = report(&raw(&shap_out.explanations))?;
    let mitigated_lime = report(&raw(&lime_out.explanations))?;
    let shap_verdicts = stats::compare_reports(&baseline_shap, &mitigated_shap, cfg.alpha)?;
    let lime_verdicts = stats::compare_reports(&baseline_lime, &mitigated_lime, cfg.alpha)?;

    let manifest = serde_json::json!({
        "master_seed": master_seed,
        "synthetic_data": truth.synthetic,
        "dataset": ds.manifest,
        "config": cfg,
        "baseline_model": {
            "hidden_nodes": baseline.hidden_nodes,
            "seed": baseline.seed,
            "test_auc": baseline.test_auc(),
        },
        "sweep_grid": sweep.grid,
        "best_auc": sweep.best_auc,
        "mitigated_lime": lime_out.manifest,
        "mitigated_shap": shap_out.manifest,
        "instances": instances,
    });
    Ok(CaseStudyResult {
        baseline_shap,
        baseline_lime,
        mitigated_shap,
        mitigated_lime,
        shap_verdicts,
        lime_verdicts,
        instances,
        manifest,
    })
}
