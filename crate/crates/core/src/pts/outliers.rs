use super::{BoundsTable, PtsSignal, SlotState};
use crate::error::{Error, Result};

/// Deviations at or below this (channel units) never count as outliers,
/// so zero-MAD windows do not flag floating-point noise.
pub const MAD_EPSILON: f64 = 1e-9;

/// A maximal run of contiguous candidate slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CandidateRun {
    pub start: usize,
    pub len: usize,
}

impl CandidateRun {
    pub fn slots(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }
}

/// Median of a non-empty slice; reorders the slice.
pub fn median(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Flags observed slots deviating from the centered sliding-window median by
/// more than `k` times the window's (unscaled) median absolute deviation.
/// Windows shrink at the edges; only observed slots enter the statistics.
pub fn detect_outliers(signal: &PtsSignal, window_len: usize, k: f64) -> Result<Vec<CandidateRun>> {
    if window_len < 3 || window_len % 2 == 0 {
        return Err(Error::InvalidInput(format!(
            "window length must be odd and >= 3, got {window_len}"
        )));
    }
    if !(k > 0.0) {
        return Err(Error::InvalidInput(format!("k must be positive, got {k}")));
    }
    let n = signal.len();
    let half = window_len / 2;
    let observed = |i: usize| match signal.mask()[i] {
        SlotState::Observed => signal.values()[i],
        _ => None,
    };
    let mut window = Vec::with_capacity(window_len);
    let mut deviations = Vec::with_capacity(window_len);
    let mut flagged = vec![false; n];
    for (t, flag) in flagged.iter_mut().enumerate() {
        let Some(x) = observed(t) else { continue };
        window.clear();
        window.extend((t.saturating_sub(half)..(t + half + 1).min(n)).filter_map(observed));
        let med = median(&mut window);
        deviations.clear();
        deviations.extend(window.iter().map(|v| (v - med).abs()));
        let mad = median(&mut deviations);
        let dev = (x - med).abs();
        *flag = dev > k * mad && dev > MAD_EPSILON;
    }
    let mut runs = Vec::new();
    let mut t = 0;
    while t < n {
        if flagged[t] {
            let start = t;
            while t < n && flagged[t] {
                t += 1;
            }
            runs.push(CandidateRun {
                start,
                len: t - start,
            });
        } else {
            t += 1;
        }
    }
    Ok(runs)
}

/// Rejects every slot of a candidate run in which at least one value falls
/// outside the channel's clinical bounds; other runs are kept as observed.
pub fn remove_outlier_intervals(signal: &PtsSignal, runs: &[CandidateRun], bounds: &BoundsTable) -> PtsSignal {
    let mut out = signal.clone();
    for run in runs {
        let violates = run.slots().any(|slot| {
            signal.values()[slot].is_some_and(|v| !bounds.contains(signal.channel(), v))
        });
        if violates {
            for slot in run.slots() {
                out.set(slot, None, SlotState::Rejected);
            }
        }
    }
    out
}
