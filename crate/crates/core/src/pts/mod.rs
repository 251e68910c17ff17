//! Vital-sign preprocessing on the 24-hour, 5-minute grid: sliding
//! median/MAD outlier detection, bound-gated interval rejection, chart
//! imputation behind a correlation gate, and linear interpolation.

mod io;
mod outliers;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::cohort::{CohortDataset, RawSeries};
use crate::error::{Error, Result};

pub use io::{read_signals, write_audit, write_signals};
pub use outliers::{detect_outliers, median, remove_outlier_intervals, CandidateRun, MAD_EPSILON};

pub const SLOTS_PER_DAY: usize = 288;
pub const SLOT_MINUTES: usize = 5;

/// Chart imputation requires correlation strictly above this value.
pub const CHART_MIN_CORRELATION: f64 = 0.8;
/// ... over strictly more than this many common slots.
pub const CHART_MIN_COMMON: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotState {
    Observed,
    Missing,
    Rejected,
    ImputedChart,
    ImputedInterp,
}

impl SlotState {
    pub fn as_str(self) -> &'static str {
        match self {
            SlotState::Observed => "observed",
            SlotState::Missing => "missing",
            SlotState::Rejected => "rejected",
            SlotState::ImputedChart => "imputed_chart",
            SlotState::ImputedInterp => "imputed_interp",
        }
    }

    pub fn parse(s: &str) -> Option<SlotState> {
        Some(match s {
            "observed" => SlotState::Observed,
            "missing" => SlotState::Missing,
            "rejected" => SlotState::Rejected,
            "imputed_chart" => SlotState::ImputedChart,
            "imputed_interp" => SlotState::ImputedInterp,
            _ => return None,
        })
    }

    pub fn has_value(self) -> bool {
        !matches!(self, SlotState::Missing | SlotState::Rejected)
    }
}

/// One channel over 24 h: a value and a state per 5-minute slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PtsSignal {
    channel: Channel,
    values: Vec<Option<f64>>,
    mask: Vec<SlotState>,
}

impl PtsSignal {
    /// Builds a signal from per-slot observations; `None` slots are missing.
    pub fn new(channel: Channel, values: Vec<Option<f64>>) -> Result<PtsSignal> {
        if values.len() != SLOTS_PER_DAY {
            return Err(Error::InvalidInput(format!(
                "{channel} signal has {} slots, expected {SLOTS_PER_DAY}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().flatten().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{channel} signal value {v}")));
        }
        let mask = values
            .iter()
            .map(|v| if v.is_some() { SlotState::Observed } else { SlotState::Missing })
            .collect();
        Ok(PtsSignal {
            channel,
            values,
            mask,
        })
    }

    pub fn from_parts(channel: Channel, values: Vec<Option<f64>>, mask: Vec<SlotState>) -> Result<PtsSignal> {
        if values.len() != SLOTS_PER_DAY || mask.len() != SLOTS_PER_DAY {
            return Err(Error::InvalidInput(format!("{channel} signal must have {SLOTS_PER_DAY} slots")));
        }
        for (v, s) in values.iter().zip(&mask) {
            match (v, s.has_value()) {
                (Some(x), true) if x.is_finite() => {}
                (None, false) => {}
                _ => {
                    return Err(Error::InvalidInput(format!(
                        "{channel} slot state {} inconsistent with value {v:?}",
                        s.as_str()
                    )))
                }
            }
        }
        Ok(PtsSignal {
            channel,
            values,
            mask,
        })
    }

    pub fn all_missing(channel: Channel) -> PtsSignal {
        PtsSignal {
            channel,
            values: vec![None; SLOTS_PER_DAY],
            mask: vec![SlotState::Missing; SLOTS_PER_DAY],
        }
    }

    /// Bins raw `(offset_minutes, value)` observations onto the grid,
    /// averaging values that share a slot. Offsets past 24 h are ignored.
    pub fn from_raw(channel: Channel, raw: &RawSeries) -> PtsSignal {
        let binned = bin_to_grid(raw);
        PtsSignal::new(channel, binned).expect("binned values are finite and 288 long")
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn mask(&self) -> &[SlotState] {
        &self.mask
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_usable(&self) -> bool {
        self.values.iter().any(Option::is_some)
    }

    pub fn is_complete(&self) -> bool {
        self.values.iter().all(Option::is_some)
    }

    pub fn count(&self, state: SlotState) -> usize {
        self.mask.iter().filter(|&&s| s == state).count()
    }

    /// Dense values; `None` if any slot lacks a value.
    pub fn dense(&self) -> Option<Vec<f64>> {
        self.values.iter().copied().collect()
    }

    fn set(&mut self, slot: usize, value: Option<f64>, state: SlotState) {
        self.values[slot] = value;
        self.mask[slot] = state;
    }
}

/// Averages raw observations per 5-minute slot.
pub fn bin_to_grid(raw: &RawSeries) -> Vec<Option<f64>> {
    let mut sum = vec![0.0; SLOTS_PER_DAY];
    let mut n = vec![0usize; SLOTS_PER_DAY];
    for &(offset, value) in raw {
        let slot = offset as usize / SLOT_MINUTES;
        if let (true, Some(v)) = (slot < SLOTS_PER_DAY, value) {
            sum[slot] += v;
            n[slot] += 1;
        }
    }
    sum.iter()
        .zip(&n)
        .map(|(&s, &c)| (c > 0).then(|| s / c as f64))
        .collect()
}

/// Clinically implausible limits per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<Channel, (f64, f64)>", into = "BTreeMap<Channel, (f64, f64)>")]
pub struct BoundsTable {
    bounds: [(f64, f64); 5],
}

impl Default for BoundsTable {
    fn default() -> Self {
        let mut bounds = [(0.0, 0.0); 5];
        bounds[Channel::Hr.index()] = (30.0, 200.0);
        bounds[Channel::Rr.index()] = (6.0, 50.0);
        bounds[Channel::Sbp.index()] = (50.0, 220.0);
        bounds[Channel::Dbp.index()] = (20.0, 100.0);
        bounds[Channel::Spo2.index()] = (60.0, 100.0);
        BoundsTable { bounds }
    }
}

impl BoundsTable {
    pub fn new(entries: &BTreeMap<Channel, (f64, f64)>) -> Result<BoundsTable> {
        let mut table = BoundsTable::default();
        for (&channel, &(lo, hi)) in entries {
            table.bounds[channel.index()] = (lo, hi);
        }
        table.validate()?;
        Ok(table)
    }

    pub fn validate(&self) -> Result<()> {
        for channel in Channel::ALL {
            let (lo, hi) = self.get(channel);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(
                    format!("preprocess.bounds.{channel}"),
                    format!("lower bound {lo} must be below upper bound {hi}"),
                ));
            }
        }
        Ok(())
    }

    pub fn get(&self, channel: Channel) -> (f64, f64) {
        self.bounds[channel.index()]
    }

    pub fn contains(&self, channel: Channel, v: f64) -> bool {
        let (lo, hi) = self.get(channel);
        v >= lo && v <= hi
    }
}

impl TryFrom<BTreeMap<Channel, (f64, f64)>> for BoundsTable {
    type Error = Error;

    fn try_from(m: BTreeMap<Channel, (f64, f64)>) -> Result<Self> {
        BoundsTable::new(&m)
    }
}

impl From<BoundsTable> for BTreeMap<Channel, (f64, f64)> {
    fn from(t: BoundsTable) -> Self {
        Channel::ALL.iter().map(|&c| (c, t.get(c))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessParams {
    pub window_len: usize,
    pub k: f64,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams { window_len: 25, k: 3.0 }
    }
}

impl PreprocessParams {
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 3 || self.window_len % 2 == 0 {
            return Err(Error::config("preprocess.window_len", "must be odd and at least 3"));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::config("preprocess.k", "must be positive"));
        }
        Ok(())
    }
}

/// Outcome of the chart correlation gate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartGate {
    pub correlation: Option<f64>,
    pub common: usize,
    pub passed: bool,
}

/// Pearson correlation; `None` when either side has zero variance or n < 2.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Fills missing/rejected slots from binned chart values when the chart
/// tracks the monitor closely enough (correlation > 0.8 over > 15 common
/// slots). Chart values outside the clinical bounds are never used.
pub fn impute_from_chart(
    signal: &PtsSignal,
    chart: &[Option<f64>],
    bounds: &BoundsTable,
) -> (PtsSignal, ChartGate) {
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (slot, (&state, c)) in signal.mask.iter().zip(chart).enumerate() {
        if let (SlotState::Observed, Some(c)) = (state, c) {
            xs.push(signal.values[slot].expect("observed slot has a value"));
            ys.push(*c);
        }
    }
    let correlation = pearson(&xs, &ys);
    let passed = xs.len() > CHART_MIN_COMMON && correlation.is_some_and(|r| r > CHART_MIN_CORRELATION);
    let gate = ChartGate {
        correlation,
        common: xs.len(),
        passed,
    };
    let mut out = signal.clone();
    if passed {
        for (slot, c) in chart.iter().enumerate().take(out.len()) {
            if let (false, Some(c)) = (out.mask[slot].has_value(), c) {
                if bounds.contains(out.channel, *c) {
                    out.set(slot, Some(*c), SlotState::ImputedChart);
                }
            }
        }
    }
    (out, gate)
}

/// Linear interpolation across interior gaps, constant extension at the edges.
/// A signal with no values at all is returned unchanged (and stays unusable).
pub fn interpolate_gaps(signal: &PtsSignal) -> PtsSignal {
    let mut out = signal.clone();
    let valued: Vec<usize> = (0..out.len()).filter(|&i| out.values[i].is_some()).collect();
    let (Some(&first), Some(&last)) = (valued.first(), valued.last()) else {
        return out;
    };
    let first_value = out.values[first];
    let last_value = out.values[last];
    for slot in 0..first {
        out.set(slot, first_value, SlotState::ImputedInterp);
    }
    for slot in last + 1..out.len() {
        out.set(slot, last_value, SlotState::ImputedInterp);
    }
    for pair in valued.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b == a + 1 {
            continue;
        }
        let (va, vb) = (out.values[a].unwrap(), out.values[b].unwrap());
        let span = (b - a) as f64;
        for slot in a + 1..b {
            let w = (slot - a) as f64 / span;
            out.set(slot, Some(va + (vb - va) * w), SlotState::ImputedInterp);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessAudit {
    pub n_rejected: usize,
    pub n_chart_imputed: usize,
    pub n_interpolated: usize,
    pub chart_correlation: Option<f64>,
    pub gate_passed: bool,
}

/// Outlier detection, interval rejection, chart imputation, interpolation.
///
/// Observed values outside the clinical bounds that the MAD rule did not
/// flag are rejected as single-slot intervals, so every surviving value lies
/// within bounds.
pub fn preprocess_pipeline(
    signal: &PtsSignal,
    chart: &[Option<f64>],
    bounds: &BoundsTable,
    params: &PreprocessParams,
) -> Result<(PtsSignal, PreprocessAudit)> {
    params.validate()?;
    let runs = detect_outliers(signal, params.window_len, params.k)?;
    let mut cleaned = remove_outlier_intervals(signal, &runs, bounds);
    for slot in 0..cleaned.len() {
        if cleaned.mask[slot] == SlotState::Observed {
            let v = cleaned.values[slot].unwrap();
            if !bounds.contains(cleaned.channel, v) {
                cleaned.set(slot, None, SlotState::Rejected);
            }
        }
    }
    let n_rejected = cleaned.count(SlotState::Rejected) - signal.count(SlotState::Rejected);
    let (charted, gate) = impute_from_chart(&cleaned, chart, bounds);
    let n_chart_imputed = charted.count(SlotState::ImputedChart) - signal.count(SlotState::ImputedChart);
    let filled = interpolate_gaps(&charted);
    let n_interpolated = filled.count(SlotState::ImputedInterp) - signal.count(SlotState::ImputedInterp);
    Ok((
        filled,
        PreprocessAudit {
            n_rejected,
            n_chart_imputed,
            n_interpolated,
            chart_correlation: gate.correlation,
            gate_passed: gate.passed,
        },
    ))
}

pub type SignalMap = BTreeMap<String, BTreeMap<Channel, PtsSignal>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub patient_id: String,
    pub channel: Channel,
    #[serde(flatten)]
    pub audit: PreprocessAudit,
}

/// Runs the pipeline for every (patient, channel) in the cohort, in parallel.
pub fn preprocess_cohort(
    dataset: &CohortDataset,
    bounds: &BoundsTable,
    params: &PreprocessParams,
) -> Result<(SignalMap, Vec<AuditRow>)> {
    use rayon::prelude::*;

    bounds.validate()?;
    params.validate()?;
    let empty = RawSeries::new();
    let jobs: Vec<(&str, Channel)> = dataset
        .patients
        .iter()
        .flat_map(|p| Channel::ALL.iter().map(move |&c| (p.patient_id.as_str(), c)))
        .collect();
    let results: Vec<Result<(PtsSignal, PreprocessAudit)>> = jobs
        .par_iter()
        .map(|&(id, channel)| {
            let raw = dataset
                .vitals
                .get(id)
                .and_then(|m| m.get(&channel))
                .unwrap_or(&empty);
            let chart = dataset
                .chart
                .get(id)
                .and_then(|m| m.get(&channel))
                .map(bin_to_grid)
                .unwrap_or_else(|| vec![None; SLOTS_PER_DAY]);
            preprocess_pipeline(&PtsSignal::from_raw(channel, raw), &chart, bounds, params)
        })
        .collect();
    let mut signals = SignalMap::new();
    let mut audit = Vec::with_capacity(jobs.len());
    for (&(id, channel), r) in jobs.iter().zip(results) {
        let (signal, a) = r?;
        signals.entry(id.to_string()).or_default().insert(channel, signal);
        audit.push(AuditRow {
            patient_id: id.to_string(),
            channel,
            audit: a,
        });
    }
    Ok((signals, audit))
}
