//! Wilcoxon signed-rank tests and the per-dimension improvement verdict.
//!
//! Differences are always `new − old`, so "better" means a positive
//! location shift.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::io::Table;
use crate::metrics::AlignmentReport;

/// Largest sample size with an exact null distribution.
pub const EXACT_MAX_N: usize = 25;
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    Greater,
    Less,
    TwoSided,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Wilcoxon {
    /// Every difference was zero.
    NoEvidence,
    Tested {
        /// Sum of ranks of the positive differences.
        w_plus: f64,
        p: f64,
        n: usize,
        method: PMethod,
    },
}

impl Wilcoxon {
    /// p-value, treating "no evidence" as p = 1.
    pub fn p(&self) -> f64 {
        match self {
            Wilcoxon::NoEvidence => 1.0,
            Wilcoxon::Tested { p, .. } => *p,
        }
    }
}

/// Average ranks of `|d|`, 1-based.
fn abs_ranks(d: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&a, &b| d[a].abs().total_cmp(&d[b].abs()));
    let mut r = vec![0.0; d.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && d[idx[j + 1]].abs() == d[idx[i]].abs() {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Null distribution of 2·W⁺ as counts over all 2ⁿ sign patterns. Ranks
/// are doubled so that tied half-ranks become integers.
fn doubled_rank_sum_counts(doubled: &[usize]) -> Vec<f64> {
    let total: usize = doubled.iter().sum();
    let mut c = vec![0.0; total + 1];
    c[0] = 1.0;
    let mut hi = 0;
    for &r in doubled {
        for s in (0..=hi).rev() {
            if c[s] != 0.0 {
                c[s + r] += c[s];
            }
        }
        hi += r;
    }
    c
}

fn std_normal_sf(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

pub fn wilcoxon_signed_rank(diffs: &[f64], alternative: Alternative) -> Result<Wilcoxon> {
    if let Some(bad) = diffs.iter().find(|d| !d.is_finite()) {
        return Err(Error::NonFinite(format!("difference {bad}")));
    }
    let d: Vec<f64> = diffs.iter().copied().filter(|&x| x != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Ok(Wilcoxon::NoEvidence);
    }
    let ranks = abs_ranks(&d);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();

    let (p_greater, p_less, method) = if n <= EXACT_MAX_N {
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let counts = doubled_rank_sum_counts(&doubled);
        let total = 2f64.powi(n as i32);
        let obs = (2.0 * w_plus).round() as usize;
        let ge: f64 = counts[obs..].iter().sum();
        let le: f64 = counts[..=obs].iter().sum();
        (ge / total, le / total, PMethod::Exact)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let mut tie_term = 0.0;
        let mut sorted = ranks.clone();
        sorted.sort_by(f64::total_cmp);
        let mut i = 0;
        while i < sorted.len() {
            let mut j = i;
            while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
                j += 1;
            }
            let t = (j - i + 1) as f64;
            tie_term += t * t * t - t;
            i = j + 1;
        }
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let sd = var.sqrt();
        let pg = std_normal_sf((w_plus - mean - 0.5) / sd);
        let pl = 1.0 - std_normal_sf((w_plus - mean + 0.5) / sd);
        (pg, pl, PMethod::Normal)
    };
    let p = match alternative {
        Alternative::Greater => p_greater,
        Alternative::Less => p_less,
        Alternative::TwoSided => (2.0 * p_greater.min(p_less)).min(1.0),
    };
    Ok(Wilcoxon::Tested {
        w_plus,
        p: p.clamp(0.0, 1.0),
        n,
        method,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Directionality,
    Concordance,
    Relevance,
}

impl Metric {
    pub fn as_str(&self) -> &'static str {
        match self {
            Metric::Directionality => "directionality",
            Metric::Concordance => "concordance",
            Metric::Relevance => "relevance",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Change {
    Better,
    Worse,
    NoChange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Overall {
    Improved,
    NotImproved,
    Worsened,
}

impl Overall {
    pub fn as_str(&self) -> &'static str {
        match self {
            Overall::Improved => "improved",
            Overall::NotImproved => "not-improved",
            Overall::Worsened => "worsened",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionResult {
    pub delta: String,
    pub p_better: f64,
    pub p_worse: f64,
    pub change: Change,
    /// Matched pairs left after dropping undefined values.
    pub n_pairs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementVerdict {
    pub metric: Metric,
    pub per_dimension: Vec<DimensionResult>,
    pub overall: Overall,
}

/// One-sided tests in both directions for every dimension δ. `old[δ]` and
/// `new[δ]` are matched samples; pairs with a non-finite side are dropped.
pub fn test_improvement(
    metric: Metric,
    deltas: &[String],
    old: &[Vec<f64>],
    new: &[Vec<f64>],
    alpha: f64,
) -> Result<ImprovementVerdict> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::config("alpha", "must lie in (0, 1)"));
    }
    if old.len() != new.len() || deltas.len() != old.len() {
        return Err(Error::DimensionMismatch {
            expected: old.len(),
            got: new.len().min(deltas.len()),
        });
    }
    let mut per = Vec::with_capacity(old.len());
    for ((delta, o), n) in deltas.iter().zip(old).zip(new) {
        if o.len() != n.len() {
            return Err(Error::DimensionMismatch {
                expected: o.len(),
                got: n.len(),
            });
        }
        let diffs: Vec<f64> = o
            .iter()
            .zip(n)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| b - a)
            .collect();
        let p_better = wilcoxon_signed_rank(&diffs, Alternative::Greater)?.p();
        let p_worse = wilcoxon_signed_rank(&diffs, Alternative::Less)?.p();
        let change = if p_better < alpha {
            Change::Better
        } else if p_worse < alpha {
            Change::Worse
        } else {
            Change::NoChange
        };
        per.push(DimensionResult {
            delta: delta.clone(),
            p_better,
            p_worse,
            change,
            n_pairs: diffs.len(),
        });
    }
    let better = per.iter().any(|d| d.change == Change::Better);
    let worse = per.iter().any(|d| d.change == Change::Worse);
    let overall = match (better, worse) {
        (true, false) => Overall::Improved,
        (false, true) => Overall::Worsened,
        _ => Overall::NotImproved,
    };
    Ok(ImprovementVerdict {
        metric,
        per_dimension: per,
        overall,
    })
}

fn transpose(rows: &[Vec<f64>], width: usize) -> Vec<Vec<f64>> {
    (0..width).map(|j| rows.iter().map(|r| r[j]).collect()).collect()
}

/// Verdicts for all three metrics between two reports over the same
/// instances: per-feature sign indicators, per-instance concordance, and
/// per-instance relevance for each k.
pub fn compare_reports(old: &AlignmentReport, new: &AlignmentReport, alpha: f64) -> Result<[ImprovementVerdict; 3]> {
    if old.m != new.m || old.features != new.features || old.ks != new.ks {
        return Err(Error::config(
            "reports",
            "must cover the same instances, features and k values",
        ));
    }
    let d = old.features.len();
    let dir = test_improvement(
        Metric::Directionality,
        &old.features,
        &transpose(&old.sign_indicators, d),
        &transpose(&new.sign_indicators, d),
        alpha,
    )?;
    let conc = test_improvement(
        Metric::Concordance,
        &["all".to_string()],
        std::slice::from_ref(&old.concordance),
        std::slice::from_ref(&new.concordance),
        alpha,
    )?;
    let k_labels: Vec<String> = old.ks.iter().map(|k| format!("k={k}")).collect();
    let rel = test_improvement(
        Metric::Relevance,
        &k_labels,
        &transpose(&old.relevance, old.ks.len()),
        &transpose(&new.relevance, old.ks.len()),
        alpha,
    )?;
    Ok([dir, conc, rel])
}

pub fn verdict_table(verdicts: &[ImprovementVerdict]) -> Table {
    let mut t = Table::new(["metric", "delta", "p_better", "p_worse", "verdict", "overall"])
        .comment("differences are new - old; better means a positive shift");
    for v in verdicts {
        for d in &v.per_dimension {
            let change = match d.change {
                Change::Better => "better",
                Change::Worse => "worse",
                Change::NoChange => "no-change",
            };
            t.push(vec![
                v.metric.as_str().into(),
                d.delta.as_str().into(),
                d.p_better.into(),
                d.p_worse.into(),
                change.into(),
                v.overall.as_str().into(),
            ]);
        }
    }
    t
}
