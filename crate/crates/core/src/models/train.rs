use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auc::auc;
use super::mlp::{Checkpoint, MlpModel};
use crate::datagen::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng;

/// The default is full-batch descent with a moderate step: the AUC then
/// climbs over several epochs instead of saturating in the first one,
/// which is what band targeting needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// `None` for full-batch steps.
    pub batch_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.2,
            momentum: 0.0,
            batch_size: None,
        }
    }
}

impl TrainConfig {
    /// Small batches with momentum; converges in few epochs.
    pub fn minibatch() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            momentum: 0.9,
            batch_size: Some(64),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config("momentum", "must lie in [0, 1)"));
        }
        if self.batch_size == Some(0) {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceTarget {
    pub target_auc: f64,
    pub tolerance: f64,
    pub max_epochs: usize,
}

impl PerformanceTarget {
    pub fn new(target_auc: f64, tolerance: f64, max_epochs: usize) -> Result<Self> {
        if !(target_auc > 0.5 && target_auc <= 1.0) {
            return Err(Error::config("target_auc", "must lie in (0.5, 1]"));
        }
        if !(tolerance > 0.0) || target_auc - tolerance <= 0.5 {
            return Err(Error::config(
                "tolerance",
                "must be positive with target - tolerance > 0.5",
            ));
        }
        Ok(PerformanceTarget {
            target_auc,
            tolerance,
            max_epochs,
        })
    }

    pub fn contains(&self, a: f64) -> bool {
        (a - self.target_auc).abs() <= self.tolerance
    }
}

/// Gradient-descent state for one network on one dataset.
struct Trainer<'a> {
    model: MlpModel,
    velocity: Vec<f64>,
    cfg: TrainConfig,
    x: &'a Matrix,
    y: &'a [u8],
    order: Vec<usize>,
    epoch: usize,
}

impl<'a> Trainer<'a> {
    fn new(x: &'a Matrix, y: &'a [u8], hidden: usize, cfg: TrainConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        if hidden == 0 {
            return Err(Error::config("hidden_nodes", "must be at least 1"));
        }
        if x.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.rows(),
                got: y.len(),
            });
        }
        let pos = y.iter().filter(|&&v| v == 1).count();
        if pos == 0 || pos == y.len() {
            return Err(Error::SingleClass);
        }
        let model = MlpModel::init(x.cols(), hidden, seed);
        Ok(Trainer {
            velocity: vec![0.0; model.n_params()],
            model,
            cfg,
            x,
            y,
            order: (0..x.rows()).collect(),
            epoch: 0,
        })
    }

    fn step_epoch(&mut self) {
        self.epoch += 1;
        let mut r = rng::stream(self.model.seed, "mlp-shuffle", self.epoch as u64);
        self.order.shuffle(&mut r);
        let mut params = self.model.params();
        let bs = self.cfg.batch_size.unwrap_or(self.order.len());
        for batch in self.order.chunks(bs) {
            let g = self.model.gradient(self.x, self.y, batch);
            let flat = g.w1.iter().chain(&g.b1).chain(&g.w2).chain(std::iter::once(&g.b2));
            for ((p, v), gi) in params.iter_mut().zip(&mut self.velocity).zip(flat) {
                *v = self.cfg.momentum * *v - self.cfg.learning_rate * gi;
                *p += *v;
            }
            self.model.set_params(&params).expect("parameter count is fixed");
        }
    }
}

fn checkpoint(m: &MlpModel, epoch: usize, ds: &Dataset) -> Result<Checkpoint> {
    let (tx, ty) = (ds.train_x(), ds.train_y());
    let (vx, vy) = (ds.test_x(), ds.test_y());
    Ok(Checkpoint {
        epoch,
        loss: m.loss(&tx, &ty),
        train_auc: auc(&m.predict_proba(&tx)?, &ty)?,
        test_auc: auc(&m.predict_proba(&vx)?, &vy)?,
    })
}

/// Trains for a fixed number of epochs, checkpointing after each one.
pub fn train_epochs(
    ds: &Dataset,
    hidden_nodes: usize,
    cfg: &TrainConfig,
    epochs: usize,
    seed: u64,
) -> Result<MlpModel> {
    let (tx, ty) = (ds.train_x(), ds.train_y());
    let mut t = Trainer::new(&tx, &ty, hidden_nodes, *cfg, seed)?;
    let mut log = vec![checkpoint(&t.model, 0, ds)?];
    for _ in 0..epochs {
        t.step_epoch();
        log.push(checkpoint(&t.model, t.epoch, ds)?);
    }
    t.model.training_log = log;
    Ok(t.model)
}

/// Trains until the test AUC enters the target band.
///
/// Stops at the first in-band checkpoint. If a single epoch jumps past the
/// band, the best checkpoint at or below the target is returned with
/// `band_overshot` set.
pub fn train_to_target(
    ds: &Dataset,
    hidden_nodes: usize,
    target: &PerformanceTarget,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<MlpModel> {
    let (tx, ty) = (ds.train_x(), ds.train_y());
    let mut t = Trainer::new(&tx, &ty, hidden_nodes, *cfg, seed)?;
    let mut log = vec![checkpoint(&t.model, 0, ds)?];
    // Best checkpoint with AUC ≤ target so far: (auc, params, log length).
    let mut best_below: Option<(f64, Vec<f64>, usize)> = None;
    loop {
        let c = log.last().expect("log starts non-empty");
        let a = c.test_auc;
        if target.contains(a) {
            t.model.training_log = log;
            return Ok(t.model);
        }
        if a <= target.target_auc && best_below.as_ref().is_none_or(|b| a > b.0) {
            best_below = Some((a, t.model.params(), log.len()));
        }
        if a > target.target_auc + target.tolerance {
            if let Some((_, p, len)) = best_below {
                // Later checkpoints describe weights being discarded.
                log.truncate(len);
                let mut m = t.model.clone();
                m.set_params(&p)?;
                m.training_log = log;
                m.band_overshot = true;
                return Ok(m);
            }
        }
        if t.epoch >= target.max_epochs {
            let trajectory: Vec<f64> = log.iter().map(|c| c.test_auc).collect();
            return Err(Error::BandUnreachable {
                lo: target.target_auc - target.tolerance,
                hi: target.target_auc + target.tolerance,
                epochs: target.max_epochs,
                last: a,
                trajectory,
            });
        }
        t.step_epoch();
        log.push(checkpoint(&t.model, t.epoch, ds)?);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub hidden_nodes: usize,
    pub seed: u64,
    pub test_auc: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    /// Every grid cell, in (hidden, seed) grid order.
    pub grid: Vec<SweepEntry>,
    pub best_auc: f64,
    /// Selected models, fewest hidden nodes first.
    pub selected: Vec<MlpModel>,
}

/// Sorting key for candidates: fewest nodes, then higher AUC, then lower seed.
fn selection_order(a: &SweepEntry, b: &SweepEntry) -> std::cmp::Ordering {
    a.hidden_nodes
        .cmp(&b.hidden_nodes)
        .then(b.test_auc.total_cmp(&a.test_auc))
        .then(a.seed.cmp(&b.seed))
}

/// Picks up to `count` entries with AUC within `epsilon_auc` of the best.
pub fn select_simplest(grid: &[SweepEntry], epsilon_auc: f64, count: usize) -> Vec<SweepEntry> {
    let best = grid.iter().map(|e| e.test_auc).fold(f64::NEG_INFINITY, f64::max);
    let mut c: Vec<SweepEntry> = grid
        .iter()
        .copied()
        .filter(|e| e.test_auc >= best - epsilon_auc)
        .collect();
    c.sort_by(selection_order);
    c.truncate(count);
    c
}

/// Trains every (hidden, seed) cell for `epochs` epochs in parallel and
/// keeps the simplest near-best models.
pub fn complexity_sweep(
    ds: &Dataset,
    hidden_grid: &[usize],
    seed_grid: &[u64],
    epsilon_auc: f64,
    count: usize,
    cfg: &TrainConfig,
    epochs: usize,
) -> Result<SweepResult> {
    if hidden_grid.is_empty() || seed_grid.is_empty() {
        return Err(Error::config("sweep", "hidden and seed grids must be non-empty"));
    }
    if !(epsilon_auc >= 0.0) {
        return Err(Error::config("epsilon_auc", "must be non-negative"));
    }
    let cells: Vec<(usize, u64)> = hidden_grid
        .iter()
        .flat_map(|&h| seed_grid.iter().map(move |&s| (h, s)))
        .collect();
    let models: Vec<MlpModel> = cells
        .par_iter()
        .map(|&(h, s)| train_epochs(ds, h, cfg, epochs, s))
        .collect::<Result<_>>()?;
    let grid: Vec<SweepEntry> = cells
        .iter()
        .zip(&models)
        .map(|(&(h, s), m)| SweepEntry {
            hidden_nodes: h,
            seed: s,
            test_auc: m.test_auc().unwrap_or(f64::NAN),
        })
        .collect();
    let best_auc = grid.iter().map(|e| e.test_auc).fold(f64::NEG_INFINITY, f64::max);
    let selected = select_simplest(&grid, epsilon_auc, count)
        .iter()
        .map(|e| {
            let i = grid
                .iter()
                .position(|g| g.hidden_nodes == e.hidden_nodes && g.seed == e.seed)
                .expect("selected from grid");
            models[i].clone()
        })
        .collect();
    Ok(SweepResult {
        grid,
        best_auc,
        selected,
    })
}

/// The full hidden grid: 2, then 5 to 100 in steps of 5.
pub fn default_hidden_grid() -> Vec<usize> {
    std::iter::once(2).chain((5..=100).step_by(5)).collect()
}
