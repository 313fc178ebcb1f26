//! Command-line runner. Every command resolves a full configuration
//! (defaults, then the config file section, then flags), executes into a
//! fresh run directory and records a manifest that `replay` can re-run.

pub mod commands;
pub mod config;
pub mod run;
pub mod sweep;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, ErrorKind, Result};
use crate::mitigate::Strategy;

use config::*;

pub use run::{replay, Manifest, ReplayReport};

#[derive(Debug, Parser)]
#[command(
    name = "xai-align",
    version,
    about = "Benchmark post hoc explainers against known marginal effects"
)]
pub struct Cli {
    /// Master seed; every component seed is derived from it.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// TOML file with a section per command.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Parent directory of run directories.
    #[arg(long, global = true, default_value = "runs")]
    pub out: PathBuf,
    /// Worker threads (default: all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Do not echo log lines to stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct DataArgs {
    /// Generator id, e.g. loan-correlated, marketing, random-linear-25.
    #[arg(long)]
    pub generator: Option<String>,
    #[arg(long)]
    pub rows: Option<usize>,
    /// Directory written by `gen` instead of generating afresh.
    #[arg(long)]
    pub data: Option<PathBuf>,
}

impl DataArgs {
    fn apply(&self, d: &mut DataSource) {
        if let Some(g) = &self.generator {
            d.generator = g.clone();
        }
        if let Some(r) = self.rows {
            d.rows = r;
        }
        if let Some(p) = &self.data {
            d.path = Some(p.clone());
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a dataset with known marginal effects.
    Gen {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Train the network on a dataset.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        hidden: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Train until the test AUC is within `--tolerance` of this.
        #[arg(long)]
        target_auc: Option<f64>,
        #[arg(long)]
        tolerance: Option<f64>,
        #[arg(long)]
        max_epochs: Option<usize>,
    },
    /// Explain test rows with LIME or SHAP.
    Explain {
        #[command(flatten)]
        data: DataArgs,
        /// The `model` directory of a train run.
        #[arg(long)]
        model: Option<PathBuf>,
        /// lime, shap or shap-normalized.
        #[arg(long)]
        explainer: Option<String>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        lime_nu: Option<f64>,
        #[arg(long)]
        lime_samples: Option<usize>,
        #[arg(long)]
        lime_seeds: Option<usize>,
    },
    /// Score explanations against the ground truth.
    Eval {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        explanations: Option<PathBuf>,
        /// Earlier explanations of the same rows to test improvement against.
        #[arg(long)]
        baseline: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        #[arg(long)]
        id: Option<String>,
    },
    /// Run a recommended mitigation pipeline.
    Mitigate {
        #[command(flatten)]
        data: DataArgs,
        /// lime-track or shap-track.
        #[arg(long)]
        strategy: Option<String>,
        #[arg(long)]
        m: Option<usize>,
    },
    /// Operator-gap grid and LIME convergence checks.
    Theory {
        /// full or small.
        #[arg(long)]
        grid: Option<String>,
        #[arg(long)]
        no_convergence: bool,
    },
    /// Home-loan case study, baseline against mitigated.
    Casestudy {
        /// Records with the case-study feature columns and `label`.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Rows to simulate when no CSV is given.
        #[arg(long)]
        rows: Option<usize>,
        #[arg(long)]
        m: Option<usize>,
    },
    /// Alignment against the number of features over random linear data.
    Sweep {
        #[arg(long)]
        datasets: Option<usize>,
        /// Fixed dimensions cycled over datasets instead of random ones.
        #[arg(long, value_delimiter = ',')]
        dims: Option<Vec<usize>>,
        #[arg(long)]
        m: Option<usize>,
    },
    /// Re-run a recorded run and check its outputs are byte-identical.
    Replay {
        /// Run directory containing manifest.json.
        run_dir: PathBuf,
    },
}

fn parse_strategy(s: &str) -> Result<Strategy> {
    match s {
        "lime-track" => Ok(Strategy::LimeTrack),
        "shap-track" => Ok(Strategy::ShapTrack),
        _ => Err(Error::config(
            "strategy",
            format!("`{s}` is not lime-track or shap-track"),
        )),
    }
}

/// Builds the full command spec and master seed from file and flags.
pub fn resolve(cli: &Cli) -> Result<(CommandSpec, u64)> {
    let file = match &cli.config {
        Some(p) => ConfigFile::read(p)?,
        None => ConfigFile::default(),
    };
    let seed = cli.seed.or(file.seed).unwrap_or(0);
    let mut spec = match &cli.command {
        Command::Gen { data } => {
            let mut c: GenConfig = file.section("gen")?;
            data.apply(&mut c.data);
            CommandSpec::Gen(c)
        }
        Command::Train {
            data,
            hidden,
            epochs,
            target_auc,
            tolerance,
            max_epochs,
        } => {
            let mut c: TrainCmdConfig = file.section("train")?;
            data.apply(&mut c.data);
            c.hidden = hidden.unwrap_or(c.hidden);
            c.epochs = epochs.unwrap_or(c.epochs);
            c.target_auc = target_auc.or(c.target_auc);
            c.tolerance = tolerance.unwrap_or(c.tolerance);
            c.max_epochs = max_epochs.unwrap_or(c.max_epochs);
            CommandSpec::Train(c)
        }
        Command::Explain {
            data,
            model,
            explainer,
            m,
            lime_nu,
            lime_samples,
            lime_seeds,
        } => {
            let mut c: ExplainCmdConfig = file.section("explain")?;
            data.apply(&mut c.data);
            if model.is_some() {
                c.model = model.clone();
            }
            if let Some(e) = explainer {
                c.explainer = e.parse()?;
            }
            c.m = m.unwrap_or(c.m);
            if lime_nu.is_some() {
                c.lime.nu = *lime_nu;
            }
            c.lime.n_samples = lime_samples.unwrap_or(c.lime.n_samples);
            c.lime_seeds = lime_seeds.unwrap_or(c.lime_seeds);
            CommandSpec::Explain(c)
        }
        Command::Eval {
            data,
            explanations,
            baseline,
            ks,
            id,
        } => {
            let mut c: EvalConfig = file.section("eval")?;
            data.apply(&mut c.data);
            if explanations.is_some() {
                c.explanations = explanations.clone();
            }
            if baseline.is_some() {
                c.baseline = baseline.clone();
            }
            if let Some(ks) = ks {
                c.ks = ks.clone();
            }
            if let Some(id) = id {
                c.id = id.clone();
            }
            CommandSpec::Eval(c)
        }
        Command::Mitigate { data, strategy, m } => {
            let mut c: MitigateCmdConfig = file.section("mitigate")?;
            data.apply(&mut c.data);
            if let Some(s) = strategy {
                c.strategy = parse_strategy(s)?;
            }
            c.pipeline.m = m.unwrap_or(c.pipeline.m);
            CommandSpec::Mitigate(c)
        }
        Command::Theory { grid, no_convergence } => {
            let mut c: TheoryCmdConfig = file.section("theory")?;
            if let Some(g) = grid {
                c.grid = named_grid(g)?;
            }
            if *no_convergence {
                c.convergence = None;
            }
            CommandSpec::Theory(c)
        }
        Command::Casestudy { csv, rows, m } => {
            let mut c: CaseCmdConfig = file.section("casestudy")?;
            if csv.is_some() {
                c.csv = csv.clone();
            }
            c.rows = rows.unwrap_or(c.rows);
            c.study.pipeline.m = m.unwrap_or(c.study.pipeline.m);
            CommandSpec::Casestudy(c)
        }
        Command::Sweep { datasets, dims, m } => {
            let mut c: sweep::SweepConfig = file.section("sweep")?;
            c.datasets = datasets.unwrap_or(c.datasets);
            if let Some(d) = dims {
                c.dims = d.clone();
            }
            c.m = m.unwrap_or(c.m);
            CommandSpec::Sweep(c)
        }
        Command::Replay { .. } => {
            return Err(Error::config("command", "replay has no configuration"));
        }
    };
    commands::canonicalize_inputs(&mut spec)?;
    Ok((spec, seed))
}

/// Runs a resolved spec into a fresh directory under `out`.
pub fn run_spec(spec: CommandSpec, seed: u64, out: &Path, jobs: Option<usize>, quiet: bool) -> Result<PathBuf> {
    run::run(run::RunRequest {
        spec,
        seed,
        out,
        jobs,
        quiet,
    })
}

/// Entry point behind `main`: returns the run directory.
pub fn dispatch(cli: &Cli) -> Result<PathBuf> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(Error::config("jobs", "must be at least 1"));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(j).build_global();
    }
    if let Command::Replay { run_dir } = &cli.command {
        let r = replay(run_dir, &cli.out, cli.jobs, cli.quiet)?;
        if !r.identical() {
            return Err(Error::Data(format!(
                "replay differs: mismatched {:?}, missing {:?}, extra {:?} (new run in {})",
                r.mismatched,
                r.missing,
                r.extra,
                r.run_dir.display()
            )));
        }
        eprintln!("replay identical: {} artifacts", r.matched.len());
        return Ok(r.run_dir);
    }
    let (spec, seed) = resolve(cli)?;
    run_spec(spec, seed, &cli.out, cli.jobs, cli.quiet)
}

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Config => EXIT_CONFIG,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Numeric => EXIT_NUMERIC,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("xai-align").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("c.toml");
        std::fs::write(&cfg, "seed = 3\n[train]\nhidden = 7\nepochs = 9\n").unwrap();
        let cli = parse(&["--config", cfg.to_str().unwrap(), "train", "--epochs", "4"]);
        let (spec, seed) = resolve(&cli).unwrap();
        assert_eq!(seed, 3);
        match spec {
            CommandSpec::Train(c) => {
                assert_eq!(c.hidden, 7);
                assert_eq!(c.epochs, 4);
            }
            other => panic!("{other:?}"),
        }
        let cli = parse(&["--config", cfg.to_str().unwrap(), "--seed", "11", "train"]);
        assert_eq!(resolve(&cli).unwrap().1, 11);
    }

    #[test]
    fn bad_explainer_is_config_error() {
        let cli = parse(&["explain", "--explainer", "kernel"]);
        let e = resolve(&cli).unwrap_err();
        assert_eq!(exit_code(&e), EXIT_CONFIG);
    }

    #[test]
    fn exit_codes_are_distinct() {
        assert_eq!(exit_code(&Error::config("x", "y")), EXIT_CONFIG);
        assert_eq!(exit_code(&Error::Data("x".into())), EXIT_DATA);
        assert_eq!(exit_code(&Error::Singular("x".into())), EXIT_NUMERIC);
    }
}
