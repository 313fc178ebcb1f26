//! Ground-truth benchmarking of post hoc explainers.
//!
//! Synthetic data with known marginal effects ([`datagen`]), a
//! single-hidden-layer network as the black box ([`models`]), LIME and
//! SHAP written from first principles ([`lime`], [`shap`]), the three
//! alignment metrics ([`metrics`]), mitigation strategies
//! ([`mitigate`]), Wilcoxon improvement testing ([`stats`]), numerical
//! checks of the ridge-operator theory ([`theory`]) and the home-loan case
//! study ([`casestudy`]).

// `!(x > 0.0)` is used on purpose so NaN fails validation; index loops read
// better than iterator chains in the numeric kernels.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod blackbox;
pub mod casestudy;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod io;
pub mod lime;
pub mod linalg;
pub mod matrix;
pub mod metrics;
pub mod mitigate;
pub mod models;
pub mod rng;
pub mod shap;
pub mod stats;
pub mod theory;

pub use error::{Error, Result};
