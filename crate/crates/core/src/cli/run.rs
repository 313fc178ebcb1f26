//! Run directories, manifests and replay.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::file_sha256;

use super::commands::execute;
use super::config::CommandSpec;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const LOG_FILE: &str = "log";

/// Collects progress lines for the run's `log` file, echoing them to stderr.
#[derive(Debug)]
pub struct RunLog {
    start: Instant,
    lines: Vec<String>,
    quiet: bool,
}

impl RunLog {
    pub fn new(quiet: bool) -> Self {
        RunLog {
            start: Instant::now(),
            lines: Vec::new(),
            quiet,
        }
    }

    pub fn info(&mut self, msg: impl AsRef<str>) {
        let line = format!("[{:>9.3}s] {}", self.start.elapsed().as_secs_f64(), msg.as_ref());
        if !self.quiet {
            eprintln!("{line}");
        }
        self.lines.push(line);
    }

    fn render(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

/// What a command reports back besides the files it wrote.
#[derive(Debug, Default)]
pub struct Outcome {
    pub component_seeds: BTreeMap<String, u64>,
    /// Input files read, with their hashes at run time.
    pub inputs: BTreeMap<String, String>,
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn seed(&mut self, label: &str, seed: u64) {
        self.component_seeds.insert(label.to_string(), seed);
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), file_sha256(path)?);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub master_seed: u64,
    /// Command name and its fully resolved configuration.
    pub spec: CommandSpec,
    pub component_seeds: BTreeMap<String, u64>,
    pub inputs: BTreeMap<String, String>,
    /// sha256 of every output file, keyed by path relative to the run dir.
    pub artifacts: BTreeMap<String, String>,
    pub notes: Vec<String>,
    pub started_at: String,
    pub wall_clock_secs: f64,
    pub jobs: Option<usize>,
    pub replay_of: Option<PathBuf>,
}

impl Manifest {
    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(MANIFEST_FILE);
        let text =
            fs::read_to_string(&path).map_err(|e| Error::Data(format!("cannot read {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Creates `<out>/<timestamp>-<label>/`, suffixing a counter if taken.
pub fn create_run_dir(out: &Path, label: &str) -> Result<PathBuf> {
    fs::create_dir_all(out)?;
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    let base = format!("{stamp}-{label}");
    let mut dir = out.join(&base);
    let mut k = 1;
    while dir.exists() {
        k += 1;
        dir = out.join(format!("{base}-{k}"));
    }
    fs::create_dir(&dir)?;
    Ok(dir)
}

fn collect_files(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect_files(root, &p, out)?;
            continue;
        }
        let rel = p
            .strip_prefix(root)
            .expect("walked path is under root")
            .to_string_lossy()
            .replace('\\', "/");
        if rel == MANIFEST_FILE || rel == LOG_FILE {
            continue;
        }
        out.insert(rel, file_sha256(&p)?);
    }
    Ok(())
}

/// Hashes of all outputs in a run directory (manifest and log excluded).
pub fn artifact_hashes(run_dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    collect_files(run_dir, run_dir, &mut out)?;
    Ok(out)
}

pub struct RunRequest<'a> {
    pub spec: CommandSpec,
    pub seed: u64,
    pub out: &'a Path,
    pub jobs: Option<usize>,
    pub quiet: bool,
}

/// Executes one command into a fresh run directory and writes its
/// manifest and log. Returns the run directory.
pub fn run(req: RunRequest<'_>) -> Result<PathBuf> {
    run_labelled(req, None)
}

fn run_labelled(req: RunRequest<'_>, replay_of: Option<PathBuf>) -> Result<PathBuf> {
    let label = match &replay_of {
        Some(_) => format!("replay-{}", req.spec.name()),
        None => req.spec.name().to_string(),
    };
    let dir = create_run_dir(req.out, &label)?;
    let started_at = chrono::Local::now().to_rfc3339();
    let clock = Instant::now();
    let mut log = RunLog::new(req.quiet);
    log.info(format!("{} seed={} dir={}", req.spec.name(), req.seed, dir.display()));
    let result = execute(&req.spec, req.seed, &dir, &mut log);
    let outcome = match result {
        Ok(o) => o,
        Err(e) => {
            log.info(format!("failed: {e}"));
            let _ = fs::write(dir.join(LOG_FILE), log.render());
            return Err(e);
        }
    };
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        master_seed: req.seed,
        spec: req.spec,
        component_seeds: outcome.component_seeds,
        inputs: outcome.inputs,
        artifacts: artifact_hashes(&dir)?,
        notes: outcome.notes,
        started_at,
        wall_clock_secs: clock.elapsed().as_secs_f64(),
        jobs: req.jobs,
        replay_of,
    };
    log.info(format!("wrote {} artifacts", manifest.artifacts.len()));
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    fs::write(dir.join(LOG_FILE), log.render())?;
    Ok(dir)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub run_dir: PathBuf,
    pub matched: Vec<String>,
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
    pub extra: Vec<String>,
}

impl ReplayReport {
    pub fn identical(&self) -> bool {
        self.mismatched.is_empty() && self.missing.is_empty() && self.extra.is_empty()
    }
}

/// Re-runs the command recorded in `original`'s manifest into a new run
/// directory under `out` and compares every artifact hash. Inputs whose
/// hash changed since the original run are rejected up front.
pub fn replay(original: &Path, out: &Path, jobs: Option<usize>, quiet: bool) -> Result<ReplayReport> {
    let m = Manifest::load(original)?;
    for (path, hash) in &m.inputs {
        let now = file_sha256(Path::new(path)).map_err(|e| Error::Data(format!("replay input {path}: {e}")))?;
        if &now != hash {
            return Err(Error::Data(format!(
                "replay input {path} changed since the original run"
            )));
        }
    }
    let dir = run_labelled(
        RunRequest {
            spec: m.spec.clone(),
            seed: m.master_seed,
            out,
            jobs,
            quiet,
        },
        Some(original.to_path_buf()),
    )?;
    let new = Manifest::load(&dir)?;
    let mut report = ReplayReport {
        run_dir: dir,
        matched: Vec::new(),
        mismatched: Vec::new(),
        missing: Vec::new(),
        extra: Vec::new(),
    };
    for (name, hash) in &m.artifacts {
        match new.artifacts.get(name) {
            Some(h) if h == hash => report.matched.push(name.clone()),
            Some(_) => report.mismatched.push(name.clone()),
            None => report.missing.push(name.clone()),
        }
    }
    report.extra = new
        .artifacts
        .keys()
        .filter(|k| !m.artifacts.contains_key(*k))
        .cloned()
        .collect();
    Ok(report)
}
