use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::blackbox::BlackBox;
use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_f64};
use crate::matrix::{sigmoid, Matrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Rectifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub epoch: usize,
    pub loss: f64,
    pub train_auc: f64,
    pub test_auc: f64,
}

/// One hidden layer of rectified units feeding a sigmoid output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub n_inputs: usize,
    pub hidden_nodes: usize,
    pub activation: Activation,
    /// Input→hidden weights, `hidden × inputs`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Hidden→output weights.
    pub w2: Vec<f64>,
    pub b2: f64,
    pub seed: u64,
    pub training_log: Vec<Checkpoint>,
    /// Set when the AUC band was jumped over and an earlier checkpoint
    /// below the target was returned instead.
    #[serde(default)]
    pub band_overshot: bool,
}

/// Gradient of the mean logistic loss with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: f64,
}

impl MlpModel {
    /// Weights uniform in ±1/√fan_in, drawn from `seed`.
    pub fn init(n_inputs: usize, hidden_nodes: usize, seed: u64) -> Self {
        let mut r = rng::stream(seed, "mlp-init", 0);
        let a1 = 1.0 / (n_inputs.max(1) as f64).sqrt();
        let a2 = 1.0 / (hidden_nodes.max(1) as f64).sqrt();
        let mut u = |a: f64| r.random_range(-a..=a);
        let w1 = (0..hidden_nodes * n_inputs).map(|_| u(a1)).collect();
        let b1 = (0..hidden_nodes).map(|_| u(a1)).collect();
        let w2 = (0..hidden_nodes).map(|_| u(a2)).collect();
        let b2 = u(a2);
        MlpModel {
            n_inputs,
            hidden_nodes,
            activation: Activation::Rectifier,
            w1,
            b1,
            w2,
            b2,
            seed,
            training_log: Vec::new(),
            band_overshot: false,
        }
    }

    /// All-zero weights; predicts 0.5 everywhere.
    pub fn zeros(n_inputs: usize, hidden_nodes: usize) -> Self {
        MlpModel {
            n_inputs,
            hidden_nodes,
            activation: Activation::Rectifier,
            w1: vec![0.0; hidden_nodes * n_inputs],
            b1: vec![0.0; hidden_nodes],
            w2: vec![0.0; hidden_nodes],
            b2: 0.0,
            seed: 0,
            training_log: Vec::new(),
            band_overshot: false,
        }
    }

    #[inline]
    fn hidden_pre(&self, x: &[f64], k: usize) -> f64 {
        let w = &self.w1[k * self.n_inputs..(k + 1) * self.n_inputs];
        self.b1[k] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Output logit.
    pub fn logit(&self, x: &[f64]) -> f64 {
        let mut z = self.b2;
        for k in 0..self.hidden_nodes {
            let h = self.hidden_pre(x, k);
            if h > 0.0 {
                z += self.w2[k] * h;
            }
        }
        z
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>> {
        if x.cols() != self.n_inputs {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs,
                got: x.cols(),
            });
        }
        Ok(x.iter_rows().map(|r| sigmoid(self.logit(r))).collect())
    }

    /// Mean logistic loss on `(x, y)`.
    pub fn loss(&self, x: &Matrix, y: &[u8]) -> f64 {
        let n = x.rows() as f64;
        x.iter_rows()
            .zip(y)
            .map(|(r, &t)| {
                let z = self.logit(r);
                // log(1 + e^z) − t·z, stable in both tails.
                let softplus = if z > 0.0 {
                    z + (-z).exp().ln_1p()
                } else {
                    z.exp().ln_1p()
                };
                softplus - f64::from(t) * z
            })
            .sum::<f64>()
            / n
    }

    /// Backpropagated gradient of the mean loss over `rows` of `x`.
    pub fn gradient(&self, x: &Matrix, y: &[u8], rows: &[usize]) -> Gradient {
        let d = self.n_inputs;
        let hn = self.hidden_nodes;
        let mut g = Gradient {
            w1: vec![0.0; hn * d],
            b1: vec![0.0; hn],
            w2: vec![0.0; hn],
            b2: 0.0,
        };
        let mut pre = vec![0.0; hn];
        for &i in rows {
            let xi = x.row(i);
            let mut z = self.b2;
            for (k, p) in pre.iter_mut().enumerate() {
                *p = self.hidden_pre(xi, k);
                if *p > 0.0 {
                    z += self.w2[k] * *p;
                }
            }
            let dz = sigmoid(z) - f64::from(y[i]);
            g.b2 += dz;
            for k in 0..hn {
                if pre[k] > 0.0 {
                    g.w2[k] += dz * pre[k];
                    let dh = dz * self.w2[k];
                    g.b1[k] += dh;
                    let row = &mut g.w1[k * d..(k + 1) * d];
                    for (gw, xv) in row.iter_mut().zip(xi) {
                        *gw += dh * xv;
                    }
                }
            }
        }
        let inv = 1.0 / rows.len().max(1) as f64;
        g.w1.iter_mut().for_each(|v| *v *= inv);
        g.b1.iter_mut().for_each(|v| *v *= inv);
        g.w2.iter_mut().for_each(|v| *v *= inv);
        g.b2 *= inv;
        g
    }

    /// Parameters flattened in the order w1, b1, w2, b2.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.push(self.b2);
        p
    }

    pub fn n_params(&self) -> usize {
        self.hidden_nodes * (self.n_inputs + 2) + 1
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.n_params() {
            return Err(Error::DimensionMismatch {
                expected: self.n_params(),
                got: p.len(),
            });
        }
        let (a, rest) = p.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.hidden_nodes);
        let (c, rest) = rest.split_at(self.hidden_nodes);
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2 = rest[0];
        Ok(())
    }

    /// `model.json` (architecture, seed, training log) plus `weights.txt`
    /// (one value per line, w1 row-major then b1, w2, b2).
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let meta = serde_json::json!({
            "architecture": {
                "inputs": self.n_inputs,
                "hidden_nodes": self.hidden_nodes,
                "hidden_activation": self.activation,
                "output": "sigmoid",
            },
            "seed": self.seed,
            "training_log": self.training_log,
            "band_overshot": self.band_overshot,
        });
        fs::write(dir.join("model.json"), serde_json::to_string_pretty(&meta)?)?;
        let mut w = String::new();
        for v in self.params() {
            let _ = writeln!(w, "{}", fmt_f64(v));
        }
        fs::write(dir.join("weights.txt"), w)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("model.json"))?)?;
        let arch = &meta["architecture"];
        let n_inputs = arch["inputs"]
            .as_u64()
            .ok_or_else(|| Error::Data("model.json: architecture.inputs".into()))? as usize;
        let hidden = arch["hidden_nodes"]
            .as_u64()
            .ok_or_else(|| Error::Data("model.json: architecture.hidden_nodes".into()))? as usize;
        let mut m = MlpModel::zeros(n_inputs, hidden);
        m.seed = meta["seed"].as_u64().unwrap_or(0);
        m.training_log = serde_json::from_value(meta["training_log"].clone())?;
        m.band_overshot = meta["band_overshot"].as_bool().unwrap_or(false);
        let params: Vec<f64> = fs::read_to_string(dir.join("weights.txt"))?
            .lines()
            .enumerate()
            .map(|(i, l)| {
                parse_f64(l).ok_or_else(|| Error::Row {
                    row: i,
                    reason: format!("bad weight `{l}`"),
                })
            })
            .collect::<Result<_>>()?;
        m.set_params(&params)?;
        Ok(m)
    }

    /// Test AUC of the last checkpoint, if trained.
    pub fn test_auc(&self) -> Option<f64> {
        self.training_log.last().map(|c| c.test_auc)
    }
}

impl BlackBox for MlpModel {
    fn n_features(&self) -> usize {
        self.n_inputs
    }

    fn predict(&self, x: &[f64]) -> f64 {
        sigmoid(self.logit(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_predicts_one_half() {
        let m = MlpModel::zeros(3, 4);
        let x = Matrix::from_rows(&[vec![1.0, -2.0, 3.0], vec![0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(m.predict_proba(&x).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let m = MlpModel::zeros(3, 4);
        let x = Matrix::zeros(2, 2);
        assert!(matches!(
            m.predict_proba(&x),
            Err(Error::DimensionMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn single_node_is_monotone_in_preactivation() {
        // h = relu(x), out = σ(2h − 1): strictly increasing for x > 0.
        let mut m = MlpModel::zeros(1, 1);
        m.w1 = vec![1.0];
        m.w2 = vec![2.0];
        m.b2 = -1.0;
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ps: Vec<f64> = xs.iter().map(|&x| m.predict(&[x])).collect();
        for (x, p) in xs.iter().zip(&ps) {
            let closed = 1.0 / (1.0 + (-(2.0 * x.max(0.0) - 1.0)).exp());
            assert!((p - closed).abs() < 1e-15);
        }
        assert!(ps.windows(2).skip(1).all(|w| w[1] > w[0]));
    }

    #[test]
    fn params_round_trip() {
        let m = MlpModel::init(3, 5, 9);
        let mut z = MlpModel::zeros(3, 5);
        z.set_params(&m.params()).unwrap();
        assert_eq!(z.params(), m.params());
        assert!(z.set_params(&[0.0]).is_err());
    }

    #[test]
    fn init_respects_fan_in_bounds() {
        let m = MlpModel::init(16, 8, 1);
        assert!(m.w1.iter().all(|w| w.abs() <= 0.25));
        assert!(m.w2.iter().all(|w| w.abs() <= 1.0 / 8f64.sqrt()));
    }
}
