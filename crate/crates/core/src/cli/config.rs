//! Resolved per-command configuration. Each struct is one section of the
//! TOML config file; every field has a default, flags override both.

use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::casestudy::CaseStudyConfig;
use crate::error::{Error, Result};
use crate::lime::LimeConfig;
use crate::metrics::{DEFAULT_EPS1, DEFAULT_EPS2};
use crate::mitigate::{PipelineConfig, Strategy};
use crate::models::TrainConfig;
use crate::shap::ShapConfig;
use crate::stats::DEFAULT_ALPHA;
use crate::theory::ConvergenceGrid;

use super::sweep::SweepConfig;

/// Either a generator run on the master seed or a directory written by
/// `gen` (`dataset.csv` + `dataset.json`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSource {
    pub generator: String,
    pub rows: usize,
    pub path: Option<PathBuf>,
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource {
            generator: "loan-correlated".into(),
            rows: 5000,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub data: DataSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainCmdConfig {
    pub data: DataSource,
    pub hidden: usize,
    /// Fixed epoch count, used when `target_auc` is unset.
    pub epochs: usize,
    pub target_auc: Option<f64>,
    pub tolerance: f64,
    pub max_epochs: usize,
    pub train: TrainConfig,
}

impl Default for TrainCmdConfig {
    fn default() -> Self {
        TrainCmdConfig {
            data: DataSource::default(),
            hidden: 10,
            epochs: 200,
            target_auc: None,
            tolerance: 0.02,
            max_epochs: 2000,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplainerKind {
    Lime,
    Shap,
    ShapNormalized,
}

impl std::str::FromStr for ExplainerKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lime" => Ok(ExplainerKind::Lime),
            "shap" => Ok(ExplainerKind::Shap),
            "shap-normalized" => Ok(ExplainerKind::ShapNormalized),
            _ => Err(Error::config(
                "explainer",
                format!("`{s}` is not one of lime, shap, shap-normalized"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainCmdConfig {
    pub data: DataSource,
    /// Directory written by `train` (the `model` subdirectory of its run).
    pub model: Option<PathBuf>,
    pub explainer: ExplainerKind,
    pub m: usize,
    pub lime: LimeConfig,
    pub lime_seeds: usize,
    pub shap: ShapConfig,
}

impl Default for ExplainCmdConfig {
    fn default() -> Self {
        ExplainCmdConfig {
            data: DataSource::default(),
            model: None,
            explainer: ExplainerKind::Lime,
            m: 100,
            lime: LimeConfig::default(),
            lime_seeds: 1,
            shap: ShapConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub data: DataSource,
    pub explanations: Option<PathBuf>,
    /// Optional earlier explanations of the same rows; adds Wilcoxon
    /// verdicts of `explanations` against it.
    pub baseline: Option<PathBuf>,
    /// Empty means `1..=min(5, D−1)`.
    pub ks: Vec<usize>,
    pub eps1: f64,
    pub eps2: f64,
    pub alpha: f64,
    pub id: String,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            data: DataSource::default(),
            explanations: None,
            baseline: None,
            ks: Vec::new(),
            eps1: DEFAULT_EPS1,
            eps2: DEFAULT_EPS2,
            alpha: DEFAULT_ALPHA,
            id: "eval".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MitigateCmdConfig {
    pub data: DataSource,
    pub strategy: Strategy,
    pub pipeline: PipelineConfig,
    pub ks: Vec<usize>,
}

impl Default for MitigateCmdConfig {
    fn default() -> Self {
        MitigateCmdConfig {
            data: DataSource::default(),
            strategy: Strategy::LimeTrack,
            pipeline: PipelineConfig::default(),
            ks: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceCmd {
    pub d: usize,
    pub ns: Vec<usize>,
    pub nu: f64,
    pub lambda: f64,
    pub replicates: usize,
}

impl Default for ConvergenceCmd {
    fn default() -> Self {
        ConvergenceCmd {
            d: 5,
            ns: vec![100, 1000, 10_000, 100_000],
            nu: 1e4,
            lambda: 1.0,
            replicates: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoryCmdConfig {
    pub grid: ConvergenceGrid,
    pub convergence: Option<ConvergenceCmd>,
}

impl Default for TheoryCmdConfig {
    fn default() -> Self {
        TheoryCmdConfig {
            grid: ConvergenceGrid::full(),
            convergence: Some(ConvergenceCmd::default()),
        }
    }
}

/// Named grids accepted by `theory --grid`.
pub fn named_grid(name: &str) -> Result<ConvergenceGrid> {
    match name {
        "full" => Ok(ConvergenceGrid::full()),
        "small" => Ok(ConvergenceGrid {
            nus: vec![0.1, 1e4],
            ns: vec![100, 1000],
            ds: vec![5],
            replicates: 3,
        }),
        _ => Err(Error::config("grid", format!("unknown grid `{name}` (full, small)"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaseCmdConfig {
    /// Real records; `None` simulates features from the coefficient table.
    pub csv: Option<PathBuf>,
    pub rows: usize,
    pub study: CaseStudyConfig,
}

impl Default for CaseCmdConfig {
    fn default() -> Self {
        CaseCmdConfig {
            csv: None,
            rows: 5000,
            study: CaseStudyConfig::default(),
        }
    }
}

/// Everything needed to re-run a command, as stored in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", content = "config", rename_all = "kebab-case")]
pub enum CommandSpec {
    Gen(GenConfig),
    Train(TrainCmdConfig),
    Explain(ExplainCmdConfig),
    Eval(EvalConfig),
    Mitigate(MitigateCmdConfig),
    Theory(TheoryCmdConfig),
    Casestudy(CaseCmdConfig),
    Sweep(SweepConfig),
}

impl CommandSpec {
    pub fn name(&self) -> &'static str {
        match self {
            CommandSpec::Gen(_) => "gen",
            CommandSpec::Train(_) => "train",
            CommandSpec::Explain(_) => "explain",
            CommandSpec::Eval(_) => "eval",
            CommandSpec::Mitigate(_) => "mitigate",
            CommandSpec::Theory(_) => "theory",
            CommandSpec::Casestudy(_) => "casestudy",
            CommandSpec::Sweep(_) => "sweep",
        }
    }
}

/// Parsed config file: an optional top-level `seed` plus one table per
/// command.
#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    table: toml::Table,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
        let seed = match table.get("seed") {
            None => None,
            Some(toml::Value::Integer(s)) if *s >= 0 => Some(*s as u64),
            Some(_) => return Err(Error::config("seed", "must be a non-negative integer")),
        };
        for key in table.keys() {
            if !matches!(
                key.as_str(),
                "seed" | "gen" | "train" | "explain" | "eval" | "mitigate" | "theory" | "casestudy" | "sweep"
            ) {
                return Err(Error::config(key.clone(), "unknown config section"));
            }
        }
        Ok(ConfigFile { seed, table })
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// The `section` table deserialized over defaults.
    pub fn section<T: DeserializeOwned + Default>(&self, section: &str) -> Result<T> {
        match self.table.get(section) {
            None => Ok(T::default()),
            Some(v) => v
                .clone()
                .try_into()
                .map_err(|e: toml::de::Error| Error::config(section, e.message().to_string())),
        }
    }
}
