//! Periodized Daubechies-3 pyramid transform.

use serde::{Deserialize, Serialize};

/// Orthonormal 6-tap Daubechies low-pass (analysis) filter.
pub const DB3_LOWPASS: [f64; 6] = [
    0.332_670_552_950_082_63,
    0.806_891_509_311_092_7,
    0.459_877_502_118_491_5,
    -0.135_011_020_010_254_6,
    -0.085_441_273_882_026_66,
    0.035_226_291_885_709_554,
];

/// Quadrature-mirror high-pass filter `g[k] = (-1)^k h[5 - k]`.
pub fn db3_highpass() -> [f64; 6] {
    let mut g = [0.0; 6];
    for (k, gk) in g.iter_mut().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        *gk = sign * DB3_LOWPASS[5 - k];
    }
    g
}

/// Detail coefficients per level (level 1 first) and the final approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub details: Vec<Vec<f64>>,
    pub approximation: Vec<f64>,
}

impl Decomposition {
    pub fn energy(&self) -> f64 {
        self.details
            .iter()
            .flatten()
            .chain(&self.approximation)
            .map(|c| c * c)
            .sum()
    }
}

fn analysis_step(x: &[f64], h: &[f64; 6], g: &[f64; 6]) -> (Vec<f64>, Vec<f64>) {
    let n = x.len();
    let half = n / 2;
    let mut a = vec![0.0; half];
    let mut d = vec![0.0; half];
    for i in 0..half {
        for k in 0..6 {
            let v = x[(2 * i + k) % n];
            a[i] += h[k] * v;
            d[i] += g[k] * v;
        }
    }
    (a, d)
}

/// Multilevel decomposition. Each level needs an even input length of at
/// least 6; otherwise `None`.
pub fn dwt_db3(x: &[f64], levels: usize) -> Option<Decomposition> {
    if levels == 0 {
        return None;
    }
    let g = db3_highpass();
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        if approx.len() < DB3_LOWPASS.len() || approx.len() % 2 != 0 {
            return None;
        }
        let (a, d) = analysis_step(&approx, &DB3_LOWPASS, &g);
        details.push(d);
        approx = a;
    }
    Some(Decomposition {
        details,
        approximation: approx,
    })
}

/// Synthesis filter bank; exact inverse of [`dwt_db3`].
pub fn idwt_db3(dec: &Decomposition) -> Vec<f64> {
    let g = db3_highpass();
    let mut approx = dec.approximation.clone();
    for d in dec.details.iter().rev() {
        let half = approx.len();
        let n = 2 * half;
        let mut x = vec![0.0; n];
        for i in 0..half {
            for k in 0..6 {
                x[(2 * i + k) % n] += DB3_LOWPASS[k] * approx[i] + g[k] * d[i];
            }
        }
        approx = x;
    }
    approx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletStat {
    Mean,
    MeanAbs,
}

/// Mean (or mean absolute value) of the detail coefficients at `level`.
pub fn wavelet_feature(x: &[f64], level: usize, stat: WaveletStat) -> Option<f64> {
    let dec = dwt_db3(x, level)?;
    let d = &dec.details[level - 1];
    let n = d.len() as f64;
    Some(match stat {
        WaveletStat::Mean => d.iter().sum::<f64>() / n,
        WaveletStat::MeanAbs => d.iter().map(|v| v.abs()).sum::<f64>() / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_identities() {
        let s: f64 = DB3_LOWPASS.iter().sum();
        let e: f64 = DB3_LOWPASS.iter().map(|h| h * h).sum();
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
        assert!((e - 1.0).abs() < 1e-12);
        let g = db3_highpass();
        assert!(g.iter().sum::<f64>().abs() < 1e-12);
        // even-shift orthogonality of the low-pass filter
        for shift in [2, 4] {
            let dot: f64 = (0..6 - shift).map(|k| DB3_LOWPASS[k] * DB3_LOWPASS[k + shift]).sum();
            assert!(dot.abs() < 1e-12, "shift {shift}: {dot}");
        }
    }

    #[test]
    fn constant_series_has_zero_details() {
        let dec = dwt_db3(&[42.0; 288], 5).unwrap();
        for d in &dec.details {
            assert!(d.iter().all(|c| c.abs() < 1e-10));
        }
        assert_eq!(wavelet_feature(&[42.0; 288], 3, WaveletStat::Mean).map(|v| v.abs() < 1e-10), Some(true));
    }

    #[test]
    fn depth_limits() {
        assert!(dwt_db3(&[1.0; 288], 5).is_some());
        assert!(dwt_db3(&[1.0; 288], 6).is_none());
        assert!(dwt_db3(&[1.0; 4], 1).is_none());
        assert!(dwt_db3(&[1.0; 7], 1).is_none());
        assert!(dwt_db3(&[1.0; 8], 0).is_none());
    }

    #[test]
    fn single_atom_lives_at_level_one() {
        let mut details = vec![vec![0.0; 144], vec![0.0; 72]];
        details[0][40] = 1.0;
        let atom = idwt_db3(&Decomposition {
            details,
            approximation: vec![0.0; 72],
        });
        let l1 = wavelet_feature(&atom, 1, WaveletStat::MeanAbs).unwrap();
        let l2 = wavelet_feature(&atom, 2, WaveletStat::MeanAbs).unwrap();
        assert!((l1 - 1.0 / 144.0).abs() < 1e-12);
        assert!(l2 < 1e-12);
    }
}
