//! The interface explainers use to query a model.

use crate::matrix::{dot, Matrix};

/// A model mapping one standardized feature row to a real-valued output
/// (a probability for classifiers). Implementations must be safe to call
/// concurrently.
pub trait BlackBox: Sync {
    fn n_features(&self) -> usize;

    fn predict(&self, x: &[f64]) -> f64;

    fn predict_rows(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }
}

impl<B: BlackBox + ?Sized> BlackBox for &B {
    fn n_features(&self) -> usize {
        (**self).n_features()
    }
    fn predict(&self, x: &[f64]) -> f64 {
        (**self).predict(x)
    }
    fn predict_rows(&self, x: &Matrix) -> Vec<f64> {
        (**self).predict_rows(x)
    }
}

/// `f(x) = intercept + coefᵀx`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn new(coef: Vec<f64>, intercept: f64) -> Self {
        LinearModel { coef, intercept }
    }
}

impl BlackBox for LinearModel {
    fn n_features(&self) -> usize {
        self.coef.len()
    }
    fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + dot(&self.coef, x)
    }
}

/// Wraps a closure as a model.
pub struct FnModel<F> {
    d: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> FnModel<F> {
    pub fn new(d: usize, f: F) -> Self {
        FnModel { d, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> BlackBox for FnModel<F> {
    fn n_features(&self) -> usize {
        self.d
    }
    fn predict(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}
