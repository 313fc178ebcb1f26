//! Data-alignment metrics: directionality, concordance and top-k relevance
//! of explanations against true marginal effects.
//!
//! Non-finite explanation entries (undefined normalized SHAP values) are
//! dropped: they do not count towards a feature's directionality, and the
//! rank metrics for that instance use only its defined features.

use std::path::Path;

use rand_distr::{Distribution as _, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{Cell, Table};
use crate::matrix::{mean_se, Matrix};
use crate::rng;

pub const DEFAULT_EPS1: f64 = 1e-2;
pub const DEFAULT_EPS2: f64 = 1e-2;

/// Sign agreement indicator for one instance and feature. `row_max` is
/// the largest defined |e| in the instance's row.
pub fn sign_correct(e_j: f64, row_max: f64, beta_j: f64, eps1: f64, eps2: f64) -> bool {
    if beta_j.abs() > eps1 {
        beta_j * e_j > 0.0
    } else if row_max == 0.0 {
        // The whole row is zero: nothing was ranked above a near-zero effect.
        true
    } else {
        e_j.abs() / row_max < eps2
    }
}

fn row_max_abs(row: &[f64]) -> f64 {
    row.iter().filter(|v| v.is_finite()).fold(0.0, |m, v| m.max(v.abs()))
}

/// Fraction of instances whose importance for feature `j` has the right
/// sign; `None` if no instance has a defined value.
pub fn directionality(all_e: &Matrix, j: usize, beta_j: f64, eps1: f64, eps2: f64) -> Option<f64> {
    let mut hits = 0usize;
    let mut n = 0usize;
    for row in all_e.iter_rows() {
        let e = row[j];
        if !e.is_finite() {
            continue;
        }
        n += 1;
        hits += usize::from(sign_correct(e, row_max_abs(row), beta_j, eps1, eps2));
    }
    (n > 0).then(|| hits as f64 / n as f64)
}

/// 1-based ranks of `v` in ascending order, ties broken by position.
pub fn ranks(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]).then(a.cmp(&b)));
    let mut r = vec![0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank + 1;
    }
    r
}

/// Spearman's `1 − 6Σd²/(D(D²−1))` on signed values.
pub fn concordance(e: &[f64], beta: &[f64]) -> Result<f64> {
    if e.len() != beta.len() {
        return Err(Error::DimensionMismatch {
            expected: beta.len(),
            got: e.len(),
        });
    }
    let d = e.len();
    if d < 2 {
        return Err(Error::config("D", "concordance needs at least two features"));
    }
    let re = ranks(e);
    let rb = ranks(beta);
    let ss: usize = re.iter().zip(&rb).map(|(a, b)| a.abs_diff(*b).pow(2)).sum();
    let d = d as f64;
    Ok(1.0 - 6.0 * ss as f64 / (d * (d * d - 1.0)))
}

/// Indices of the `k` largest magnitudes, ties broken by index.
pub fn top_k(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].abs().total_cmp(&v[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Share of β's top-k features (by magnitude) also in e's top k.
pub fn relevance_k(e: &[f64], beta: &[f64], k: usize) -> Result<f64> {
    if e.len() != beta.len() {
        return Err(Error::DimensionMismatch {
            expected: beta.len(),
            got: e.len(),
        });
    }
    if k == 0 || k >= e.len() {
        return Err(Error::config("k", "must satisfy 1 <= k <= D-1"));
    }
    let te = top_k(e, k);
    let shared = top_k(beta, k).iter().filter(|i| te.contains(i)).count();
    Ok(shared as f64 / k as f64)
}

/// `m × d` standard normal importances.
pub fn random_explainer(m: usize, d: usize, seed: u64) -> Matrix {
    let mut r = rng::stream(seed, "random-explainer", 0);
    let data = (0..m * d).map(|_| StandardNormal.sample(&mut r)).collect();
    Matrix::from_vec(m, d, data).expect("sizes agree")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceSummary {
    pub k: usize,
    pub mean: f64,
    pub se: f64,
    /// Instances with at least k+1 defined features.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub features: Vec<String>,
    pub beta: Vec<f64>,
    /// Per feature; NaN when no instance has a defined value.
    pub directionality: Vec<f64>,
    pub directionality_n: Vec<usize>,
    /// `sign_indicators[i][j]` is 1 if instance `i` got feature `j`'s
    /// direction right, 0 if not, NaN if undefined.
    pub sign_indicators: Vec<Vec<f64>>,
    /// Per instance; NaN when fewer than two features are defined.
    pub concordance: Vec<f64>,
    pub concordance_mean: f64,
    pub concordance_se: f64,
    pub ks: Vec<usize>,
    /// `relevance[i][t]` for instance `i` and `ks[t]`; NaN when undefined.
    pub relevance: Vec<Vec<f64>>,
    pub relevance_summary: Vec<RelevanceSummary>,
    pub m: usize,
    pub eps1: f64,
    pub eps2: f64,
}

fn finite_mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
    let v: Vec<f64> = xs.filter(|x| x.is_finite()).collect();
    let (m, se) = mean_se(&v);
    (m, se, v.len())
}

pub fn evaluate(
    explanations: &Matrix,
    beta: &[f64],
    features: &[String],
    ks: &[usize],
    eps1: f64,
    eps2: f64,
) -> Result<AlignmentReport> {
    let d = beta.len();
    if explanations.cols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: explanations.cols(),
        });
    }
    if features.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: features.len(),
        });
    }
    if let Some(&k) = ks.iter().find(|&&k| k == 0 || k >= d) {
        return Err(Error::config("ks", format!("k = {k} outside 1..={}", d - 1)));
    }

    let mut dir = Vec::with_capacity(d);
    let mut directionality_n = Vec::with_capacity(d);
    for (j, &b) in beta.iter().enumerate() {
        dir.push(directionality(explanations, j, b, eps1, eps2).unwrap_or(f64::NAN));
        directionality_n.push(explanations.iter_rows().filter(|r| r[j].is_finite()).count());
    }

    let sign_indicators = explanations
        .iter_rows()
        .map(|row| {
            let mx = row_max_abs(row);
            row.iter()
                .zip(beta)
                .map(|(&e, &b)| {
                    if e.is_finite() {
                        f64::from(u8::from(sign_correct(e, mx, b, eps1, eps2)))
                    } else {
                        f64::NAN
                    }
                })
                .collect()
        })
        .collect();

    let mut conc = Vec::with_capacity(explanations.rows());
    let mut rel = Vec::with_capacity(explanations.rows());
    for row in explanations.iter_rows() {
        let keep: Vec<usize> = (0..d).filter(|&j| row[j].is_finite()).collect();
        let e: Vec<f64> = keep.iter().map(|&j| row[j]).collect();
        let b: Vec<f64> = keep.iter().map(|&j| beta[j]).collect();
        conc.push(if keep.len() >= 2 {
            concordance(&e, &b)?
        } else {
            f64::NAN
        });
        rel.push(
            ks.iter()
                .map(|&k| {
                    if k < keep.len() {
                        relevance_k(&e, &b, k)
                    } else {
                        Ok(f64::NAN)
                    }
                })
                .collect::<Result<Vec<f64>>>()?,
        );
    }
    let (concordance_mean, concordance_se, _) = finite_mean_se(conc.iter().copied());
    let relevance_summary = ks
        .iter()
        .enumerate()
        .map(|(t, &k)| {
            let (mean, se, n) = finite_mean_se(rel.iter().map(|r| r[t]));
            RelevanceSummary { k, mean, se, n }
        })
        .collect();
    Ok(AlignmentReport {
        features: features.to_vec(),
        beta: beta.to_vec(),
        directionality: dir,
        directionality_n,
        sign_indicators,
        concordance: conc,
        concordance_mean,
        concordance_se,
        ks: ks.to_vec(),
        relevance: rel,
        relevance_summary,
        m: explanations.rows(),
        eps1,
        eps2,
    })
}

impl AlignmentReport {
    pub fn feature_table(&self) -> Table {
        let mut t = Table::new(["feature", "beta", "directionality", "n_defined"]);
        for j in 0..self.features.len() {
            t.push(vec![
                self.features[j].as_str().into(),
                self.beta[j].into(),
                self.directionality[j].into(),
                self.directionality_n[j].into(),
            ]);
        }
        t
    }

    pub fn instance_table(&self) -> Table {
        let mut header = vec!["instance".to_string(), "concordance".to_string()];
        header.extend(self.ks.iter().map(|k| format!("relevance_{k}")));
        let mut t = Table::new(header);
        for (i, c) in self.concordance.iter().enumerate() {
            let mut row: Vec<Cell> = vec![i.into(), (*c).into()];
            row.extend(self.relevance[i].iter().map(|&v| Cell::from(v)));
            t.push(row);
        }
        t
    }

    pub fn k_table(&self) -> Table {
        let mut t = Table::new(["k", "relevance_mean", "relevance_se", "n"]);
        for r in &self.relevance_summary {
            t.push(vec![r.k.into(), r.mean.into(), r.se.into(), r.n.into()]);
        }
        t
    }

    /// Writes `<id>_features.csv`, `<id>_instances.csv`, `<id>_k.csv`, each
    /// headed by a comment naming the figure it feeds.
    pub fn write_csvs(&self, dir: &Path, id: &str, figure: &str) -> Result<()> {
        let note = format!("feeds: {figure}");
        self.feature_table()
            .comment(note.clone())
            .write(&dir.join(format!("{id}_features.csv")))?;
        self.instance_table()
            .comment(note.clone())
            .write(&dir.join(format!("{id}_instances.csv")))?;
        self.k_table().comment(note).write(&dir.join(format!("{id}_k.csv")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn directionality_examples() {
        let e = m(&[&[1.0], &[2.0], &[-1.0], &[0.5]]);
        assert_eq!(directionality(&e, 0, 3.0, 0.01, 0.01), Some(0.75));
        let e = m(&[&[0.005, 1.0]]);
        assert_eq!(directionality(&e, 0, 0.0, 0.01, 0.01), Some(1.0));
        let e = m(&[&[0.0, 0.0]]);
        assert_eq!(directionality(&e, 0, 0.0, 0.01, 0.01), Some(1.0));
        let e = m(&[&[0.0, 1.0]]);
        assert_eq!(directionality(&e, 0, 0.0, 0.01, 0.01), Some(1.0));
    }

    #[test]
    fn concordance_examples() {
        assert_eq!(concordance(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(concordance(&[3.0, 2.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(), -1.0);
        let c = concordance(&[1.0, 3.0, 2.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((c - 0.8).abs() < 1e-15);
    }

    #[test]
    fn ties_rank_by_index() {
        assert_eq!(ranks(&[2.0, 1.0, 2.0, 1.0]), vec![3, 1, 4, 2]);
    }

    #[test]
    fn relevance_examples() {
        let b = [3.0, -2.0, 1.0, 0.5];
        assert_eq!(relevance_k(&[6.0, -4.0, 2.0, 1.0], &b, 2).unwrap(), 1.0);
        assert_eq!(relevance_k(&[6.0, 0.0, 2.0, 0.0], &b, 2).unwrap(), 0.5);
        assert!(relevance_k(&b, &b, 4).is_err());
    }

    #[test]
    fn undefined_entries_are_dropped() {
        let e = m(&[&[f64::NAN, 1.0, 2.0], &[1.0, 1.0, 2.0]]);
        let r = evaluate(
            &e,
            &[1.0, 1.0, 2.0],
            &["a".into(), "b".into(), "c".into()],
            &[1],
            DEFAULT_EPS1,
            DEFAULT_EPS2,
        )
        .unwrap();
        assert_eq!(r.directionality_n, vec![1, 2, 2]);
        assert_eq!(r.concordance, vec![1.0, 1.0]);
    }
}
