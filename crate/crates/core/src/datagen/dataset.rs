use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{fmt_f64, parse_f64};
use crate::matrix::{mean, std_pop, Matrix};
use crate::rng;

pub const DEFAULT_TEST_FRACTION: f64 = 0.2;

/// Disjoint train/test row indices, each sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn random(n_rows: usize, test_fraction: f64, seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n_rows).collect();
        idx.shuffle(&mut rng::stream(seed, "split", 0));
        let n_test = ((n_rows as f64) * test_fraction).round() as usize;
        let n_test = n_test.min(n_rows.saturating_sub(1));
        let mut test = idx[..n_test].to_vec();
        let mut train = idx[n_test..].to_vec();
        test.sort_unstable();
        train.sort_unstable();
        Split { train, test }
    }
}

/// Per-column standardization statistics from the training rows.
///
/// Constant columns get a unit scale so they map to zero instead of NaN.
pub fn fit_standardizer(raw: &Matrix, train: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut means = Vec::with_capacity(raw.cols());
    let mut sds = Vec::with_capacity(raw.cols());
    for j in 0..raw.cols() {
        let col: Vec<f64> = train.iter().map(|&i| raw.get(i, j)).collect();
        let m = mean(&col);
        let s = std_pop(&col);
        means.push(m);
        sds.push(if s > 0.0 && s.is_finite() { s } else { 1.0 });
    }
    (means, sds)
}

pub fn standardize(raw: &Matrix, means: &[f64], sds: &[f64]) -> Matrix {
    let mut out = raw.clone();
    for i in 0..out.rows() {
        for (j, v) in out.row_mut(i).iter_mut().enumerate() {
            *v = (*v - means[j]) / sds[j];
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub generator: String,
    pub seed: u64,
    pub n_rows: usize,
    /// Free-form provenance notes (encoding conventions, fallbacks).
    #[serde(default)]
    pub notes: Vec<String>,
}

/// Standardized features, binary labels and the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub x: Matrix,
    pub y: Vec<u8>,
    pub feature_means: Vec<f64>,
    pub feature_sds: Vec<f64>,
    pub split: Split,
    pub manifest: DatasetManifest,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.x.rows()
    }

    pub fn n_features(&self) -> usize {
        self.x.cols()
    }

    pub fn train_x(&self) -> Matrix {
        self.x.select_rows(&self.split.train)
    }

    pub fn test_x(&self) -> Matrix {
        self.x.select_rows(&self.split.test)
    }

    pub fn train_y(&self) -> Vec<u8> {
        self.split.train.iter().map(|&i| self.y[i]).collect()
    }

    pub fn test_y(&self) -> Vec<u8> {
        self.split.test.iter().map(|&i| self.y[i]).collect()
    }

    /// Training-split column means in standardized units (≈ 0).
    pub fn train_means(&self) -> Vec<f64> {
        let tx = self.train_x();
        (0..tx.cols()).map(|j| mean(&tx.column(j))).collect()
    }

    /// Raw feature values recovered from the stored statistics.
    pub fn unstandardize(&self) -> Matrix {
        let mut out = self.x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = *v * self.feature_sds[j] + self.feature_means[j];
            }
        }
        out
    }

    /// CSV: feature columns (standardized) then `label`.
    pub fn to_csv(&self) -> String {
        let mut out = self.feature_names.join(",");
        out.push_str(",label\n");
        for (i, row) in self.x.iter_rows().enumerate() {
            for v in row {
                out.push_str(&fmt_f64(*v));
                out.push(',');
            }
            out.push_str(&self.y[i].to_string());
            out.push('\n');
        }
        out
    }

    pub fn save(&self, csv_path: &Path, sidecar: &Path, extra: serde_json::Value) -> Result<()> {
        fs::write(csv_path, self.to_csv())?;
        let side = DatasetSidecar {
            manifest: self.manifest.clone(),
            feature_names: self.feature_names.clone(),
            feature_means: self.feature_means.clone(),
            feature_sds: self.feature_sds.clone(),
            split: self.split.clone(),
            truth: extra,
        };
        fs::write(sidecar, serde_json::to_string_pretty(&side)?)?;
        Ok(())
    }

    pub fn load(csv_path: &Path, sidecar: &Path) -> Result<(Dataset, serde_json::Value)> {
        let side: DatasetSidecar = serde_json::from_str(&fs::read_to_string(sidecar)?)?;
        let text = fs::read_to_string(csv_path)?;
        let mut lines = text.lines();
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Data("empty dataset csv".into()))?
            .split(',')
            .collect();
        let d = header.len() - 1;
        if header.last() != Some(&"label") || d != side.feature_names.len() {
            return Err(Error::Data("dataset csv header does not match sidecar".into()));
        }
        let mut data = Vec::new();
        let mut y = Vec::new();
        for (r, line) in lines.enumerate() {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != d + 1 {
                return Err(Error::Row {
                    row: r,
                    reason: format!("expected {} cells, got {}", d + 1, cells.len()),
                });
            }
            for c in &cells[..d] {
                data.push(parse_f64(c).ok_or_else(|| Error::Row {
                    row: r,
                    reason: format!("bad number `{c}`"),
                })?);
            }
            y.push(match cells[d].trim() {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Row {
                        row: r,
                        reason: format!("label must be 0 or 1, got `{other}`"),
                    })
                }
            });
        }
        let n = y.len();
        let ds = Dataset {
            feature_names: side.feature_names,
            x: Matrix::from_vec(n, d, data)?,
            y,
            feature_means: side.feature_means,
            feature_sds: side.feature_sds,
            split: side.split,
            manifest: side.manifest,
        };
        Ok((ds, side.truth))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetSidecar {
    manifest: DatasetManifest,
    feature_names: Vec<String>,
    feature_means: Vec<f64>,
    feature_sds: Vec<f64>,
    split: Split,
    truth: serde_json::Value,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_is_disjoint_and_covers_rows() {
        let s = Split::random(101, 0.2, 3);
        assert_eq!(s.test.len(), 20);
        let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
    }

    #[test]
    fn single_row_keeps_it_in_training() {
        let s = Split::random(1, 0.2, 0);
        assert_eq!(s.train, vec![0]);
        assert!(s.test.is_empty());
    }

    #[test]
    fn constant_column_gets_unit_scale() {
        let raw = Matrix::from_rows(&[vec![2.0, 1.0], vec![2.0, 3.0]]).unwrap();
        let (m, s) = fit_standardizer(&raw, &[0, 1]);
        assert_eq!(m, vec![2.0, 2.0]);
        assert_eq!(s, vec![1.0, 1.0]);
    }
}
