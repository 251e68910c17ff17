//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

pub mod certificates;

use std::collections::HashMap;

use prognosis::seed;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Seeded AR(1) series around `mean`.
pub fn ar1(key: u64, n: usize, mean: f64, sd: f64, phi: f64) -> Vec<f64> {
    let mut rng = seed::stream(key, &[0xa1]);
    let noise = Normal::new(0.0, sd).unwrap();
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            x = phi * x + noise.sample(&mut rng);
            mean + x
        })
        .collect()
}

pub fn random_walk(key: u64, n: usize) -> Vec<f64> {
    let mut rng = seed::stream(key, &[0xa2]);
    let mut x = 80.0;
    (0..n)
        .map(|_| {
            x += rng.random_range(-6.0..6.0);
            x
        })
        .collect()
}

/// (constant words, total words), counting every window explicitly.
pub fn polvar_counts(x: &[f64], d: f64, word_len: usize) -> (usize, usize) {
    let symbols: Vec<u8> = (0..x.len() - 1)
        .map(|i| if (x[i + 1] - x[i]).abs() >= d { 1 } else { 0 })
        .collect();
    let mut constant = 0;
    let mut total = 0;
    for start in 0..=symbols.len() - word_len {
        let word = &symbols[start..start + word_len];
        total += 1;
        if word.iter().all(|&s| s == 0) || word.iter().all(|&s| s == 1) {
            constant += 1;
        }
    }
    (constant, total)
}

/// Histogram of argsort patterns, each window sorted explicitly.
pub fn permutation_entropy(x: &[f64], m: usize, tau: usize) -> f64 {
    let mut hist: HashMap<Vec<usize>, usize> = HashMap::new();
    let n = x.len() - (m - 1) * tau;
    for t in 0..n {
        let window: Vec<f64> = (0..m).map(|j| x[t + j * tau]).collect();
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by(|&a, &b| window[a].partial_cmp(&window[b]).unwrap().then(a.cmp(&b)));
        *hist.entry(idx).or_default() += 1;
    }
    let h: f64 = hist
        .values()
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.ln()
        })
        .sum();
    let fact: f64 = (1..=m).map(|v| v as f64).product();
    h / fact.ln()
}

pub fn mean(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v;
    }
    s / x.len() as f64
}

pub fn sample_sd(x: &[f64]) -> f64 {
    let m = mean(x);
    let mut ss = 0.0;
    for v in x {
        ss += (v - m).powi(2);
    }
    (ss / (x.len() - 1) as f64).sqrt()
}

/// Materializes every bin; the remainder joins the last one.
pub fn binned(x: &[f64], n_bins: usize, sd: bool) -> f64 {
    let len = x.len() / n_bins;
    let mut bins: Vec<Vec<f64>> = vec![Vec::new(); n_bins];
    for (i, &v) in x.iter().enumerate() {
        bins[(i / len).min(n_bins - 1)].push(v);
    }
    let means: Vec<f64> = bins.iter().map(|b| mean(b)).collect();
    if sd {
        sample_sd(&means)
    } else {
        mean(&means)
    }
}

/// Ordinary least squares slope from the normal equations.
pub fn ols_slope(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mut st, mut sx, mut stt, mut stx) = (0.0, 0.0, 0.0, 0.0);
    for (t, &v) in x.iter().enumerate() {
        let t = t as f64;
        st += t;
        sx += v;
        stt += t * t;
        stx += t * v;
    }
    (n * stx - st * sx) / (n * stt - st * st)
}

pub fn lag1_autocorrelation(x: &[f64]) -> f64 {
    let m = mean(x);
    let mut num = 0.0;
    for i in 0..x.len() - 1 {
        num += (x[i] - m) * (x[i + 1] - m);
    }
    let mut den = 0.0;
    for v in x {
        den += (v - m).powi(2);
    }
    num / den
}

/// Daubechies-3 low-pass filter from its closed-form expression.
pub fn db3_closed_form() -> [f64; 6] {
    let r10 = 10f64.sqrt();
    let s = (5.0 + 2.0 * r10).sqrt();
    let c = 16.0 * 2f64.sqrt();
    [
        (1.0 + r10 + s) / c,
        (5.0 + r10 + 3.0 * s) / c,
        (10.0 - 2.0 * r10 + 2.0 * s) / c,
        (10.0 - 2.0 * r10 - 2.0 * s) / c,
        (5.0 + r10 - 3.0 * s) / c,
        (1.0 + r10 - s) / c,
    ]
}

/// Periodic correlation with `filter` followed by keeping even positions.
pub fn convolve_downsample(x: &[f64], filter: &[f64]) -> Vec<f64> {
    let n = x.len();
    let full: Vec<f64> = (0..n)
        .map(|j| filter.iter().enumerate().map(|(k, f)| f * x[(j + k) % n]).sum())
        .collect();
    full.into_iter().step_by(2).collect()
}

pub fn highpass(h: &[f64; 6]) -> [f64; 6] {
    let mut g = [0.0; 6];
    for k in 0..6 {
        g[k] = if k % 2 == 0 { h[5 - k] } else { -h[5 - k] };
    }
    g
}

/// Linear interpolation between valued neighbours, constant at the edges.
pub fn interpolate(values: &[Option<f64>]) -> Vec<f64> {
    let n = values.len();
    (0..n)
        .map(|i| {
            if let Some(v) = values[i] {
                return v;
            }
            let left = (0..i).rev().find(|&j| values[j].is_some());
            let right = (i + 1..n).find(|&j| values[j].is_some());
            match (left, right) {
                (Some(l), Some(r)) => {
                    let (vl, vr) = (values[l].unwrap(), values[r].unwrap());
                    vl + (vr - vl) * ((i - l) as f64 / (r - l) as f64)
                }
                (Some(l), None) => values[l].unwrap(),
                (None, Some(r)) => values[r].unwrap(),
                (None, None) => f64::NAN,
            }
        })
        .collect()
}

/// AUC as the fraction of (positive, negative) pairs ordered correctly.
pub fn pair_auc(s: &[f64], y: &[u8]) -> f64 {
    let (mut num, mut den) = (0u64, 0u64);
    for i in 0..s.len() {
        for j in 0..s.len() {
            if y[i] == 1 && y[j] == 0 {
                den += 2;
                num += if s[i] > s[j] { 2 } else if s[i] == s[j] { 1 } else { 0 };
            }
        }
    }
    num as f64 / den as f64
}

/// Two-sided rank-sum p by enumerating every rank subset of size |a|.
pub fn rank_sum_p(a: &[f64], b: &[f64]) -> f64 {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    let rank = |v: f64| (all.iter().position(|&x| x == v).unwrap() + 1) as u32;
    let w: u32 = a.iter().map(|&v| rank(v)).sum();
    let n = all.len() as u32;
    let (mut le, mut ge, mut total) = (0u64, 0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != a.len() {
            continue;
        }
        let s: u32 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
        total += 1;
        le += u64::from(s <= w);
        ge += u64::from(s >= w);
    }
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}
