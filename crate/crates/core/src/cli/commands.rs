//! One function per subcommand. Each writes its outputs into the run
//! directory and reports seeds and inputs for the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::casestudy::{self, FEATURES};
use crate::datagen::{generate, Dataset, GeneratorId};
use crate::error::{Error, Result};
use crate::io::{parse_f64, Cell, Table};
use crate::lime::{self, LimeConfig};
use crate::matrix::Matrix;
use crate::metrics::{self, AlignmentReport};
use crate::mitigate::{self, explained_instances};
use crate::models::{self, accuracy, MlpModel, PerformanceTarget};
use crate::rng::derive_seed;
use crate::shap::{self, ShapConfig, ShapMethod, DEFAULT_EPS_DIV, MAX_EXACT_FEATURES};
use crate::stats::{self, ImprovementVerdict};
use crate::theory;

use super::config::*;
use super::run::{Outcome, RunLog};
use super::sweep;

pub const DATASET_CSV: &str = "dataset.csv";
pub const DATASET_JSON: &str = "dataset.json";
pub const EXPLANATIONS_CSV: &str = "explanations.csv";

pub fn execute(spec: &CommandSpec, seed: u64, dir: &Path, log: &mut RunLog) -> Result<Outcome> {
    let mut out = Outcome::default();
    match spec {
        CommandSpec::Gen(c) => cmd_gen(c, seed, dir, log, &mut out)?,
        CommandSpec::Train(c) => cmd_train(c, seed, dir, log, &mut out)?,
        CommandSpec::Explain(c) => cmd_explain(c, seed, dir, log, &mut out)?,
        CommandSpec::Eval(c) => cmd_eval(c, seed, dir, log, &mut out)?,
        CommandSpec::Mitigate(c) => cmd_mitigate(c, seed, dir, log, &mut out)?,
        CommandSpec::Theory(c) => cmd_theory(c, seed, dir, log, &mut out)?,
        CommandSpec::Casestudy(c) => cmd_casestudy(c, seed, dir, log, &mut out)?,
        CommandSpec::Sweep(c) => cmd_sweep(c, seed, dir, log, &mut out)?,
    }
    Ok(out)
}

pub struct Loaded {
    pub ds: Dataset,
    /// Marginal effects of the observed columns, in column order.
    pub beta: Vec<f64>,
    pub truth: serde_json::Value,
}

pub fn load_data(src: &DataSource, seed: u64, out: &mut Outcome) -> Result<Loaded> {
    if let Some(p) = &src.path {
        let (csv, json) = (p.join(DATASET_CSV), p.join(DATASET_JSON));
        out.input(&csv)?;
        out.input(&json)?;
        let (ds, truth) = Dataset::load(&csv, &json)?;
        let beta = truth
            .get("observed_beta")
            .and_then(|b| b.as_array())
            .ok_or_else(|| Error::Data(format!("{} has no truth.observed_beta", json.display())))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| Error::Data("non-numeric observed_beta".into()))
            })
            .collect::<Result<Vec<f64>>>()?;
        if beta.len() != ds.n_features() {
            return Err(Error::DimensionMismatch {
                expected: ds.n_features(),
                got: beta.len(),
            });
        }
        return Ok(Loaded { ds, beta, truth });
    }
    let id: GeneratorId = src.generator.parse()?;
    let data_seed = derive_seed(seed, "data", 0);
    out.seed("data", data_seed);
    let g = generate(id, src.rows, data_seed)?;
    let beta = g.truth.observed_beta();
    let mut truth = g.truth.summary_json();
    truth["observed_beta"] = serde_json::json!(beta);
    Ok(Loaded {
        ds: g.dataset,
        beta,
        truth,
    })
}

fn default_ks(ks: &[usize], d: usize) -> Vec<usize> {
    if ks.is_empty() {
        (1..=5.min(d.saturating_sub(1))).collect()
    } else {
        ks.to_vec()
    }
}

fn canonical(p: &Path) -> Result<PathBuf> {
    p.canonicalize()
        .map_err(|e| Error::Data(format!("{}: {e}", p.display())))
}

fn cmd_gen(c: &GenConfig, seed: u64, dir: &Path, log: &mut RunLog, out: &mut Outcome) -> Result<()> {
    if c.data.path.is_some() {
        return Err(Error::config("gen.data.path", "gen creates data; drop the path"));
    }
    let l = load_data(&c.data, seed, out)?;
    log.info(format!(
        "generated {} rows x {} features with {}",
        l.ds.n_rows(),
        l.ds.n_features(),
        c.data.generator
    ));
    l.ds.save(&dir.join(DATASET_CSV), &dir.join(DATASET_JSON), l.truth.clone())?;
    let mut t = Table::new(["feature", "beta"]).comment("feeds: ground-truth marginal effects table");
    for (name, b) in l.ds.feature_names.iter().zip(&l.beta) {
        t.push(vec![name.as_str().into(), (*b).into()]);
    }
    t.write(&dir.join("ground_truth.csv"))
}

fn cmd_train(c: &TrainCmdConfig, seed: u64, dir: &Path, log: &mut RunLog, out: &mut Outcome) -> Result<()> {
    let l = load_data(&c.data, seed, out)?;
    let model_seed = derive_seed(seed, "model", 0);
    out.seed("model", model_seed);
    let model = match c.target_auc {
        Some(t) => {
            let target = PerformanceTarget::new(t, c.tolerance, c.max_epochs)?;
            models::train_to_target(&l.ds, c.hidden, &target, &c.train, model_seed)?
        }
        None => models::train_epochs(&l.ds, c.hidden, &c.train, c.epochs, model_seed)?,
    };
    let probs = model.predict_proba(&l.ds.test_x())?;
    let acc = accuracy(&probs, &l.ds.test_y(), 0.5);
    log.info(format!(
        "trained {} hidden nodes: test AUC {:.4}, accuracy {:.4}",
        c.hidden,
        model.test_auc().unwrap_or(f64::NAN),
        acc
    ));
    if model.band_overshot {
        out.notes
            .push("target band overshot in one epoch; kept the best checkpoint below target".into());
    }
    out.notes.push("accuracy uses a 0.5 probability threshold".into());
    model.save(&dir.join("model"))?;

    let mut t = Table::new(["epoch", "loss", "train_auc", "test_auc"]).comment("feeds: pipeline demo training curve");
    for cp in &model.training_log {
        t.push(vec![
            cp.epoch.into(),
            cp.loss.into(),
            cp.train_auc.into(),
            cp.test_auc.into(),
        ]);
    }
    t.write(&dir.join("training_log.csv"))?;
    let mut s = Table::new(["hidden", "epochs", "test_auc", "test_accuracy", "band_overshot"])
        .comment("feeds: pipeline demo model performance");
    s.push(vec![
        c.hidden.into(),
        model.training_log.last().map_or(0, |cp| cp.epoch).into(),
        model.test_auc().unwrap_or(f64::NAN).into(),
        acc.into(),
        model.band_overshot.into(),
    ]);
    s.write(&dir.join("summary.csv"))
}

pub fn explanation_table(features: &[String], rows: &[usize], e: &Matrix, figure: &str) -> Table {
    let mut header = vec!["instance".to_string(), "row".to_string()];
    header.extend(features.iter().cloned());
    let mut t = Table::new(header).comment(format!("feeds: {figure}"));
    for (i, &r) in rows.iter().enumerate() {
        let mut cells: Vec<Cell> = vec![i.into(), r.into()];
        cells.extend(e.row(i).iter().map(|&v| Cell::from(v)));
        t.push(cells);
    }
    t
}

/// Reads a table written by [`explanation_table`]. Feature columns must
/// match `features` in name and order.
pub fn read_explanations(path: &Path, features: &[String]) -> Result<(Vec<usize>, Matrix)> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let header = rdr.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    if cols.len() != features.len() + 2 || cols[0] != "instance" || cols[1] != "row" || cols[2..] != *features {
        return Err(Error::Data(format!(
            "{}: header must be instance,row followed by the dataset features",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    let mut values = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |reason: String| Error::Row { row: i, reason };
        rows.push(
            rec[1]
                .trim()
                .parse::<usize>()
                .map_err(|_| bad(format!("bad row index `{}`", &rec[1])))?,
        );
        for cell in rec.iter().skip(2) {
            values.push(parse_f64(cell).ok_or_else(|| bad(format!("bad number `{cell}`")))?);
        }
    }
    Ok((rows.clone(), Matrix::from_vec(rows.len(), features.len(), values)?))
}

fn cmd_explain(c: &ExplainCmdConfig, seed: u64, dir: &Path, log: &mut RunLog, out: &mut Outcome) -> Result<()> {
    let model_dir = c
        .model
        .as_ref()
        .ok_or_else(|| Error::config("explain.model", "a trained model directory is required"))?;
    let l = load_data(&c.data, seed, out)?;
    out.input(&model_dir.join("model.json"))?;
    out.input(&model_dir.join("weights.txt"))?;
    let model = MlpModel::load(model_dir)?;
    let d = l.ds.n_features();
    if model.n_inputs != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: model.n_inputs,
        });
    }
    let instances = explained_instances(&l.ds, c.m);
    let explainer_seed = derive_seed(seed, "explainer", 0);
    out.seed("explainer", explainer_seed);
    let bg = c.shap.background.clone().unwrap_or_else(|| l.ds.train_means());
    let mut shap_cfg = ShapConfig {
        background: Some(bg.clone()),
        ..c.shap.clone()
    };
    if shap_cfg.method == ShapMethod::Exact && d > MAX_EXACT_FEATURES {
        shap_cfg.method = ShapMethod::PermutationSampling;
        out.notes.push(format!(
            "D = {d} > {MAX_EXACT_FEATURES}: switched to permutation sampling"
        ));
    }
    let rows: Vec<Vec<f64>> = instances
        .par_iter()
        .map(|&r| {
            let xi = l.ds.x.row(r);
            let inst_seed = derive_seed(explainer_seed, "instance", r as u64);
            match c.explainer {
                ExplainerKind::Lime => {
                    let cfg = LimeConfig {
                        seed: inst_seed,
                        ..c.lime.clone()
                    };
                    Ok(lime::explain_averaged(&model, xi, &cfg, c.lime_seeds)?.coefficients)
                }
                ExplainerKind::Shap | ExplainerKind::ShapNormalized => {
                    let cfg = ShapConfig {
                        seed: inst_seed,
                        ..shap_cfg.clone()
                    };
                    let e = shap::explain(&model, xi, &cfg)?;
                    if c.explainer == ExplainerKind::Shap {
                        Ok(e.phi)
                    } else {
                        Ok(shap::normalize_shap(&e, xi, &bg, DEFAULT_EPS_DIV)?.values)
                    }
                }
            }
        })
        .collect::<Result<_>>()?;
    log.info(format!("explained {} instances", rows.len()));
    let e = Matrix::from_rows(&rows)?;
    explanation_table(&l.ds.feature_names, &instances, &e, "explanation matrix for eval")
        .write(&dir.join(EXPLANATIONS_CSV))
}

fn cmd_eval(c: &EvalConfig, seed: u64, dir: &Path, log: &mut RunLog, out: &mut Outcome) -> Result<()> {
    let path = c
        .explanations
        .as_ref()
        .ok_or_else(|| Error::config("eval.explanations", "an explanations CSV is required"))?;
    let l = load_data(&c.data, seed, out)?;
    out.input(path)?;
    let (rows, e) = read_explanations(path, &l.ds.feature_names)?;
    let ks = default_ks(&c.ks, l.ds.n_features());
    let report = metrics::evaluate(&e, &l.beta, &l.ds.feature_names, &ks, c.eps1, c.eps2)?;
    log.info(format!(
        "{} instances: mean concordance {:.4}",
        report.m, report.concordance_mean
    ));
    report.write_csvs(
        dir,
        &c.id,
        "alignment plots (directionality bars, concordance violins, relevance lines)",
    )?;
    if let Some(bpath) = &c.baseline {
        out.input(bpath)?;
        let (brows, be) = read_explanations(bpath, &l.ds.feature_names)?;
        if brows != rows {
            return Err(Error::Data("baseline and explanations cover different rows".into()));
        }
        let base = metrics::evaluate(&be, &l.beta, &l.ds.feature_names, &ks, c.eps1, c.eps2)?;
        base.write_csvs(dir, "baseline", "alignment plots of the baseline explainer")?;
        let v = stats::compare_reports(&base, &report, c.alpha)?;
        write_verdicts(&v, &dir.join("verdicts.csv"), "improvement test table")?;
    }
    Ok(())
}

fn write_verdicts(v: &[ImprovementVerdict], path: &Path, figure: &str) -> Result<()> {
    stats::verdict_table(v).comment(format!("feeds: {figure}")).write(path)
}

fn cmd_mitigate(c: &MitigateCmdConfig, seed: u64, dir: &Path, log: &mut RunLog, out: &mut Outcome) -> Result<()> {
    let l = load_data(&c.data, seed, out)?;
    let mut pcfg = c.pipeline.clone();
    pcfg.seed = seed;
    let count = match c.strategy {
        mitigate::Strategy::LimeTrack => pcfg.n_models,
        mitigate::Strategy::ShapTrack => 1,
    };
    let sw = models::complexity_sweep(
        &l.ds,
        &pcfg.hidden_grid,
        &pcfg.seed_grid,
        pcfg.epsilon_auc,
        count,
        &pcfg.train,
        pcfg.sweep_epochs,
    )?;
    log.info(format!("complexity sweep: best AUC {:.4}", sw.best_auc));
    let mut grid = Table::new(["hidden", "seed", "test_auc", "selected"]).comment("feeds: complexity trade-off figure");
    for g in &sw.grid {
        let selected = sw
            .selected
            .iter()
            .any(|m| m.hidden_nodes == g.hidden_nodes && m.seed == g.seed);
        grid.push(vec![
            g.hidden_nodes.into(),
            g.seed.into(),
            g.test_auc.into(),
            selected.into(),
        ]);
    }
    grid.write(&dir.join("sweep_grid.csv"))?;

    let p = mitigate::pipeline_from_sweep(&l.ds, c.strategy, &pcfg, &sw)?;
    explanation_table(
        &l.ds.feature_names,
        &p.instances,
        &p.explanations,
        "mitigated explanation matrix",
    )
    .write(&dir.join(EXPLANATIONS_CSV))?;
    let ks = default_ks(&c.ks, l.ds.n_features());
    let report = metrics::evaluate(
        &p.explanations,
        &l.beta,
        &l.ds.feature_names,
        &ks,
        metrics::DEFAULT_EPS1,
        metrics::DEFAULT_EPS2,
    )?;
    report.write_csvs(dir, "mitigated", "mitigation plots")?;
    fs::write(dir.join("pipeline.json"), serde_json::to_string_pretty(&p.manifest)?)?;
    log.info(format!("mitigated mean concordance {:.4}", report.concordance_mean));
    Ok(())
}

fn cmd_theory(c: &TheoryCmdConfig, seed: u64, dir: &Path, log: &mut RunLog, out: &mut Outcome) -> Result<()> {
    let grid_seed = derive_seed(seed, "theory-grid", 0);
    out.seed("grid", grid_seed);
    let cells = theory::run_grid(&c.grid, grid_seed);
    log.info(format!("operator-gap grid: {} cells", cells.len()));
    theory::replicate_table(&cells)
        .comment("feeds: operator-gap log-log figure, one row per replicate")
        .write(&dir.join("gap_replicates.csv"))?;
    theory::summary_table(&cells)
        .comment("feeds: operator-gap table over nu, N and D")
        .write(&dir.join("gap_summary.csv"))?;
    if let Some(cv) = &c.convergence {
        let cseed = derive_seed(seed, "theory-convergence", 0);
        out.seed("convergence", cseed);
        let pts = theory::lime_convergence(cv.d, &cv.ns, cv.nu, cv.lambda, cv.replicates, cseed)?;
        let mut t =
            Table::new(["n", "replicate", "max_abs_error"]).comment("feeds: LIME coefficient convergence check");
        let mut s = Table::new(["n", "mean_max_abs_error"]).comment("feeds: LIME coefficient convergence check");
        for p in &pts {
            for (r, e) in p.errors.iter().enumerate() {
                t.push(vec![p.n.into(), r.into(), (*e).into()]);
            }
            s.push(vec![p.n.into(), p.mean_max_error.into()]);
            log.info(format!("N = {}: mean max error {:.3e}", p.n, p.mean_max_error));
        }
        t.write(&dir.join("convergence_replicates.csv"))?;
        s.write(&dir.join("convergence.csv"))?;
    }
    Ok(())
}

fn write_reports(dir: &Path, reports: &[(&str, &AlignmentReport)], figure: &str) -> Result<()> {
    for (id, r) in reports {
        r.write_csvs(dir, id, figure)?;
    }
    Ok(())
}

fn cmd_casestudy(c: &CaseCmdConfig, seed: u64, dir: &Path, log: &mut RunLog, out: &mut Outcome) -> Result<()> {
    let data_seed = derive_seed(seed, "data", 0);
    out.seed("data", data_seed);
    let (ds, truth) = match &c.csv {
        Some(p) => {
            out.input(p)?;
            casestudy::load_case_data(p, data_seed)?
        }
        None => {
            out.notes
                .push("no records supplied: features simulated from the coefficient table".into());
            casestudy::synth_case_data(c.rows, data_seed)?
        }
    };
    let res = casestudy::run_case_study(&ds, &truth, &c.study, seed)?;
    write_reports(
        dir,
        &[
            ("baseline_shap", &res.baseline_shap),
            ("baseline_lime", &res.baseline_lime),
            ("mitigated_shap", &res.mitigated_shap),
            ("mitigated_lime", &res.mitigated_lime),
        ],
        "case-study baseline vs mitigated plots",
    )?;
    write_verdicts(
        &res.shap_verdicts,
        &dir.join("shap_verdicts.csv"),
        "case-study SHAP improvement table",
    )?;
    write_verdicts(
        &res.lime_verdicts,
        &dir.join("lime_verdicts.csv"),
        "case-study LIME improvement table",
    )?;
    let mut t = Table::new(["feature", "meaning", "coefficient"]).comment("feeds: case-study feature table");
    for f in FEATURES.iter() {
        t.push(vec![f.name.into(), f.meaning.into(), f.coefficient.into()]);
    }
    t.write(&dir.join("case_features.csv"))?;
    fs::write(dir.join("pipeline.json"), serde_json::to_string_pretty(&res.manifest)?)?;
    for v in res.shap_verdicts.iter().chain(&res.lime_verdicts) {
        log.info(format!("{}: {}", v.metric.as_str(), v.overall.as_str()));
    }
    Ok(())
}

fn cmd_sweep(c: &sweep::SweepConfig, seed: u64, dir: &Path, log: &mut RunLog, out: &mut Outcome) -> Result<()> {
    out.seed("master", seed);
    let scores = sweep::run_sweep(c, seed)?;
    let bins = sweep::bin_scores(&scores, c.bins);
    log.info(format!("scored {} datasets", c.datasets));
    sweep::dataset_table(&scores).write(&dir.join("sweep_datasets.csv"))?;
    sweep::bin_table(&bins).write(&dir.join("sweep_bins.csv"))
}

/// Absolute paths for every input a spec refers to, so the manifest
/// replays from any working directory.
pub fn canonicalize_inputs(spec: &mut CommandSpec) -> Result<()> {
    fn data(d: &mut DataSource) -> Result<()> {
        if let Some(p) = &d.path {
            d.path = Some(canonical(p)?);
        }
        Ok(())
    }
    fn opt(p: &mut Option<PathBuf>) -> Result<()> {
        if let Some(q) = p {
            *p = Some(canonical(q)?);
        }
        Ok(())
    }
    match spec {
        CommandSpec::Gen(_) | CommandSpec::Theory(_) | CommandSpec::Sweep(_) => Ok(()),
        CommandSpec::Train(c) => data(&mut c.data),
        CommandSpec::Explain(c) => {
            data(&mut c.data)?;
            opt(&mut c.model)
        }
        CommandSpec::Eval(c) => {
            data(&mut c.data)?;
            opt(&mut c.explanations)?;
            opt(&mut c.baseline)
        }
        CommandSpec::Mitigate(c) => data(&mut c.data),
        CommandSpec::Casestudy(c) => opt(&mut c.csv),
    }
}
