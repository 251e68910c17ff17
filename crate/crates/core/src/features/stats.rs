use serde::{Deserialize, Serialize};

/// Distribution, correlation and trend summaries of one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasicStats {
    pub mean: f64,
    /// Sample standard deviation (n - 1); needs two points.
    pub sd: Option<f64>,
    pub min: f64,
    pub max: f64,
    pub first: f64,
    pub last: f64,
    pub range: f64,
    /// Least-squares slope in channel units per slot.
    pub slope: Option<f64>,
    /// Lag-1 autocorrelation; missing for constant series.
    pub acf1: Option<f64>,
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn sample_sd(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let m = mean(x);
    let ss: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    Some((ss / (x.len() - 1) as f64).sqrt())
}

pub fn slope(x: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 {
        return None;
    }
    let tm = (n - 1) as f64 / 2.0;
    let xm = mean(x);
    let (mut num, mut den) = (0.0, 0.0);
    for (t, v) in x.iter().enumerate() {
        let dt = t as f64 - tm;
        num += dt * (v - xm);
        den += dt * dt;
    }
    Some(num / den)
}

pub fn acf1(x: &[f64]) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    let m = mean(x);
    let den: f64 = x.iter().map(|v| (v - m) * (v - m)).sum();
    if den <= 0.0 {
        return None;
    }
    let num: f64 = x.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
    Some(num / den)
}

/// `None` for an empty series.
pub fn basic_stats(x: &[f64]) -> Option<BasicStats> {
    let (&first, &last) = (x.first()?, x.last()?);
    let min = x.iter().copied().fold(f64::INFINITY, f64::min);
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Some(BasicStats {
        mean: mean(x),
        sd: sample_sd(x),
        min,
        max,
        first,
        last,
        range: max - min,
        slope: slope(x),
        acf1: acf1(x),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinOuter {
    Mean,
    Sd,
}

/// Splits the series into `n_bins` contiguous equal-length bins (remainder
/// slots go to the last bin), takes each bin's mean, then the outer
/// statistic across bins.
pub fn binned_stat(x: &[f64], n_bins: usize, outer: BinOuter) -> Option<f64> {
    if n_bins < 2 || x.len() < n_bins {
        return None;
    }
    let len = x.len() / n_bins;
    let means: Vec<f64> = (0..n_bins)
        .map(|b| {
            let end = if b + 1 == n_bins { x.len() } else { (b + 1) * len };
            mean(&x[b * len..end])
        })
        .collect();
    match outer {
        BinOuter::Mean => Some(mean(&means)),
        BinOuter::Sd => sample_sd(&means),
    }
}
