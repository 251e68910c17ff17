use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

fn class_counts(scores: &[f64], labels: &[u8]) -> Result<(u64, u64)> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("score".into()));
    }
    let pos = labels.iter().filter(|&&l| l == 1).count() as u64;
    let neg = labels.iter().filter(|&&l| l == 0).count() as u64;
    if pos + neg != labels.len() as u64 {
        return Err(Error::InvalidInput("labels must be 0 or 1".into()));
    }
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("both classes must be present".into()));
    }
    Ok((pos, neg))
}

/// Doubled mid-ranks (1-based) of `values`, so tied ranks stay integral.
fn doubled_midranks(values: &[f64]) -> Vec<u64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        // positions i+1..=j share the rank (i+1+j)/2
        for &k in &idx[i..j] {
            ranks[k] = (i + 1 + j) as u64;
        }
        i = j;
    }
    ranks
}

/// Mann-Whitney AUC: P(score_pos > score_neg) with ties counted one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    let ranks = doubled_midranks(scores);
    let r2: u64 = ranks.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(r, _)| r).sum();
    // 2U = 2R - n1(n1 + 1)
    let u2 = r2 - pos * (pos + 1);
    Ok(u2 as f64 / (2 * pos * neg) as f64)
}

/// (sensitivity, specificity) with `score >= threshold` called positive.
pub fn sens_spec(scores: &[f64], labels: &[u8], threshold: f64) -> Result<(f64, f64)> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut tp = 0u64;
    let mut tn = 0u64;
    for (&s, &l) in scores.iter().zip(labels) {
        match (s >= threshold, l == 1) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            _ => {}
        }
    }
    Ok((tp as f64 / pos as f64, tn as f64 / neg as f64))
}

/// Observed score maximizing Youden's J; ties go to the lower threshold.
pub fn youden_threshold(scores: &[f64], labels: &[u8]) -> Result<f64> {
    let (pos, neg) = class_counts(scores, labels)?;
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // threshold at the lowest score: everything positive
    let mut tp = pos;
    let mut tn = 0u64;
    // J * pos * neg = tp * neg + tn * pos - pos * neg, compared as integers
    let scaled = |tp: u64, tn: u64| (tp * neg + tn * pos) as i128 - (pos * neg) as i128;
    let mut best = (scaled(tp, tn), scores[idx[0]]);
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j < idx.len() && scores[idx[j]] == scores[idx[i]] {
            if labels[idx[j]] == 1 {
                tp -= 1;
            } else {
                tn += 1;
            }
            j += 1;
        }
        if j < idx.len() {
            let j_val = scaled(tp, tn);
            if j_val > best.0 {
                best = (j_val, scores[idx[j]]);
            }
        }
        i = j;
    }
    Ok(best.1)
}

/// Number of size-`n` subsets of {1..total} by rank sum.
fn rank_sum_counts(n: usize, total: usize) -> Vec<u64> {
    let max_sum = total * (total + 1) / 2;
    // counts[k][s]: subsets of size k with sum s
    let mut counts = vec![vec![0u64; max_sum + 1]; n + 1];
    counts[0][0] = 1;
    for r in 1..=total {
        for k in (1..=n.min(r)).rev() {
            for s in (r..=max_sum).rev() {
                counts[k][s] += counts[k - 1][s - r];
            }
        }
    }
    counts.swap_remove(n)
}

/// Largest combined sample size for the exact null distribution.
pub const EXACT_MAX_N: usize = 16;

/// Two-sided Wilcoxon rank-sum p-value.
pub fn wilcoxon_rank_sum(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("rank-sum test needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("rank-sum sample".into()));
    }
    let n = a.len();
    let m = b.len();
    let total = n + m;
    let combined: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = doubled_midranks(&combined);
    let w2: u64 = ranks[..n].iter().sum();
    let mut sorted = combined.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut has_ties = false;
    let mut i = 0;
    while i < total {
        let mut j = i + 1;
        while j < total && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        if j - i > 1 {
            has_ties = true;
            tie_term += t * t * t - t;
        }
        i = j;
    }
    if total <= EXACT_MAX_N && !has_ties {
        let w = (w2 / 2) as usize;
        let counts = rank_sum_counts(n, total);
        let all: u64 = counts.iter().sum();
        let lower: u64 = counts[..=w].iter().sum();
        let upper: u64 = counts[w..].iter().sum();
        let p = 2.0 * lower.min(upper) as f64 / all as f64;
        return Ok(p.min(1.0));
    }
    let nm = (n * m) as f64;
    let nt = total as f64;
    let var = nm / 12.0 * ((nt + 1.0) - tie_term / (nt * (nt - 1.0)));
    // doubled statistic minus doubled mean, exact in integers
    let diff2 = w2 as i64 - (n * (total + 1)) as i64;
    if var <= 0.0 {
        return Ok(1.0);
    }
    let dev = ((diff2.unsigned_abs() as f64) / 2.0 - 0.5).max(0.0);
    let z = dev / var.sqrt();
    let normal = Normal::standard();
    Ok((2.0 * normal.cdf(-z)).min(1.0))
}

/// Mean and normal-approximation 95% interval over estimates.
pub fn mean_ci95(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, mean, mean);
    }
    let sd = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt();
    let half = 1.96 * sd / n.sqrt();
    (mean, mean - half, mean + half)
}
