//! Independent scalar-loop oracles shared by the integration tests.
#![allow(dead_code)]

pub fn sign_ok(e: f64, row_max: f64, beta: f64, eps1: f64, eps2: f64) -> bool {
    if beta.abs() > eps1 {
        (beta > 0.0 && e > 0.0) || (beta < 0.0 && e < 0.0)
    } else if row_max == 0.0 {
        true
    } else {
        e.abs() / row_max < eps2
    }
}

/// Directionality of column `j` over rows of `e`, NaN entries skipped.
pub fn directionality(e: &[Vec<f64>], j: usize, beta: f64, eps1: f64, eps2: f64) -> Option<f64> {
    let mut hits = 0;
    let mut n = 0;
    for row in e {
        if !row[j].is_finite() {
            continue;
        }
        let mut mx = 0.0f64;
        for v in row {
            if v.is_finite() && v.abs() > mx {
                mx = v.abs();
            }
        }
        n += 1;
        if sign_ok(row[j], mx, beta, eps1, eps2) {
            hits += 1;
        }
    }
    if n == 0 {
        None
    } else {
        Some(hits as f64 / n as f64)
    }
}

/// Ascending 1-based ranks by counting, ties broken by position: O(D²).
pub fn ranks(v: &[f64]) -> Vec<usize> {
    (0..v.len())
        .map(|j| 1 + (0..v.len()).filter(|&i| v[i] < v[j] || (v[i] == v[j] && i < j)).count())
        .collect()
}

/// Spearman as the Pearson correlation of the rank vectors.
pub fn spearman(e: &[f64], beta: &[f64]) -> f64 {
    let a: Vec<f64> = ranks(e).iter().map(|&r| r as f64).collect();
    let b: Vec<f64> = ranks(beta).iter().map(|&r| r as f64).collect();
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for i in 0..a.len() {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Top k by magnitude: repeatedly take the largest unchosen |v|, lowest
/// index on ties.
pub fn top_k(v: &[f64], k: usize) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for i in 0..v.len() {
            if chosen.contains(&i) {
                continue;
            }
            match best {
                None => best = Some(i),
                Some(b) if v[i].abs() > v[b].abs() => best = Some(i),
                _ => {}
            }
        }
        chosen.push(best.unwrap());
    }
    chosen
}

pub fn relevance(e: &[f64], beta: &[f64], k: usize) -> f64 {
    let te = top_k(e, k);
    let tb = top_k(beta, k);
    tb.iter().filter(|i| te.contains(i)).count() as f64 / k as f64
}

/// One-sided "greater" p-value by enumerating all 2ⁿ sign patterns of the
/// non-zero |diffs| with average ranks (doubled to stay integral).
pub fn wilcoxon_greater_enumerated(diffs: &[f64]) -> f64 {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let mut r2 = vec![0u64; n];
    for i in 0..n {
        let less = abs.iter().filter(|&&a| a < abs[i]).count() as u64;
        let equal = abs.iter().filter(|&&a| a == abs[i]).count() as u64;
        // Average of ranks less+1 ..= less+equal, doubled.
        r2[i] = 2 * less + equal + 1;
    }
    let observed: u64 = (0..n).filter(|&i| nz[i] > 0.0).map(|i| r2[i]).sum();
    let mut at_least = 0u64;
    for mask in 0u64..(1 << n) {
        let w: u64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| r2[i]).sum();
        if w >= observed {
            at_least += 1;
        }
    }
    at_least as f64 / (1u64 << n) as f64
}
