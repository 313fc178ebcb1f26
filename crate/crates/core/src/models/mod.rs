//! The black-box classifier: a one-hidden-layer rectifier network trained
//! by mini-batch gradient descent, with AUC-band targeting and a
//! complexity sweep.

mod auc;
mod mlp;
mod train;

pub use auc::{accuracy, auc};
pub use mlp::{Activation, Checkpoint, Gradient, MlpModel};
pub use train::{
    complexity_sweep, default_hidden_grid, select_simplest, train_epochs, train_to_target, PerformanceTarget,
    SweepEntry, SweepResult, TrainConfig,
};
