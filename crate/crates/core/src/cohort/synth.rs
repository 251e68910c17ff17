//! Seeded synthetic cohorts with planted outcome signal in both modalities.
//!
//! The outcome is drawn first. A designated EHR column is then shifted by
//! `ehr_effect` standard deviations for favorable patients, and the spread
//! of heart-rate bin levels (20 contiguous bins over 24 h) is multiplied by
//! `1 + pts_effect`. Everything else is outcome-independent noise.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::{derive_labels, CohortDataset, DischargeStatus, LabelTable, PatientRecord, RawSeries};
use crate::channel::Channel;
use crate::ehr::EhrTable;
use crate::error::{Error, Result};
use crate::pts::{BoundsTable, SLOTS_PER_DAY, SLOT_MINUTES};
use crate::seed::{self, StreamRng};

pub const PLANTED_EHR_COLUMN: &str = "gcs_admission";

const EHR_COLUMNS: [&str; 12] = [
    "age",
    "sex",
    "bmi",
    "apache_score",
    PLANTED_EHR_COLUMN,
    "lactate_mean",
    "lactate_max",
    "sodium",
    "potassium",
    "monocyte_mean",
    "temperature_max",
    "troponin_peak",
];
const SPARSE_COLUMN: &str = "troponin_peak";

/// Stationary AR(1) model of one vital sign around a patient-specific mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelModel {
    pub mean: f64,
    /// Stationary within-patient standard deviation.
    pub sd: f64,
    pub phi: f64,
    /// Between-patient standard deviation of the channel mean.
    pub patient_sd: f64,
}

fn default_channels() -> BTreeMap<Channel, ChannelModel> {
    let m = |mean, sd, phi, patient_sd| ChannelModel {
        mean,
        sd,
        phi,
        patient_sd,
    };
    BTreeMap::from([
        (Channel::Hr, m(85.0, 5.0, 0.5, 8.0)),
        (Channel::Rr, m(18.0, 2.5, 0.6, 3.0)),
        (Channel::Sbp, m(120.0, 8.0, 0.7, 12.0)),
        (Channel::Dbp, m(65.0, 5.0, 0.7, 8.0)),
        (Channel::Spo2, m(96.0, 1.2, 0.6, 1.0)),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_patients: usize,
    pub favorable_rate: f64,
    /// P(died | unfavorable neurological outcome).
    pub death_rate_unfavorable: f64,
    /// Fraction of generated patients violating one inclusion criterion.
    pub ineligible_rate: f64,
    pub channels: BTreeMap<Channel, ChannelModel>,
    /// Standard deviation of heart-rate bin levels for unfavorable patients.
    pub hr_bin_sd: f64,
    pub n_bins: usize,
    pub vitals_missing_rate: f64,
    /// Per-slot probability that a missing gap starts.
    pub gap_rate: f64,
    pub gap_len: (usize, usize),
    pub spike_rate: f64,
    pub artifact_run_rate: f64,
    pub chart_interval_slots: usize,
    pub chart_missing_rate: f64,
    /// Chart measurement noise as a fraction of the channel sd.
    pub chart_noise: f64,
    /// Fraction of (patient, channel) pairs whose chart is unrelated to the monitor.
    pub chart_decorrelated_rate: f64,
    pub ehr_missing_rate: f64,
    pub sparse_missing_rate: f64,
    pub ehr_effect: f64,
    pub pts_effect: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_patients: 600,
            favorable_rate: 1046.0 / 2216.0,
            death_rate_unfavorable: 894.0 / 1170.0,
            ineligible_rate: 0.0,
            channels: default_channels(),
            hr_bin_sd: 3.0,
            n_bins: 20,
            vitals_missing_rate: 0.03,
            gap_rate: 0.004,
            gap_len: (3, 24),
            spike_rate: 0.004,
            artifact_run_rate: 0.002,
            chart_interval_slots: 12,
            chart_missing_rate: 0.15,
            chart_noise: 0.2,
            chart_decorrelated_rate: 0.2,
            ehr_missing_rate: 0.08,
            sparse_missing_rate: 0.6,
            ehr_effect: 1.0,
            pts_effect: 0.3,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_patients < 10 {
            return Err(Error::config("synthetic.n_patients", "must be at least 10"));
        }
        let rates = [
            ("favorable_rate", self.favorable_rate),
            ("death_rate_unfavorable", self.death_rate_unfavorable),
            ("ineligible_rate", self.ineligible_rate),
            ("vitals_missing_rate", self.vitals_missing_rate),
            ("gap_rate", self.gap_rate),
            ("spike_rate", self.spike_rate),
            ("artifact_run_rate", self.artifact_run_rate),
            ("chart_missing_rate", self.chart_missing_rate),
            ("chart_decorrelated_rate", self.chart_decorrelated_rate),
            ("ehr_missing_rate", self.ehr_missing_rate),
            ("sparse_missing_rate", self.sparse_missing_rate),
        ];
        for (name, v) in rates {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("synthetic.{name}"), "must lie in [0, 1]"));
            }
        }
        if self.spike_rate + self.artifact_run_rate > 1.0 {
            return Err(Error::config(
                "synthetic.spike_rate",
                "spike_rate + artifact_run_rate must not exceed 1",
            ));
        }
        let nonneg = [
            ("hr_bin_sd", self.hr_bin_sd),
            ("chart_noise", self.chart_noise),
            ("ehr_effect", self.ehr_effect),
            ("pts_effect", self.pts_effect),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!("synthetic.{name}"), "must be finite and non-negative"));
            }
        }
        if self.n_bins < 2 || self.n_bins > SLOTS_PER_DAY {
            return Err(Error::config("synthetic.n_bins", "must lie in 2..=288"));
        }
        if self.gap_len.0 == 0 || self.gap_len.0 > self.gap_len.1 {
            return Err(Error::config("synthetic.gap_len", "need 1 <= min <= max"));
        }
        if self.chart_interval_slots == 0 {
            return Err(Error::config("synthetic.chart_interval_slots", "must be positive"));
        }
        let bounds = BoundsTable::default();
        for channel in Channel::ALL {
            let Some(m) = self.channels.get(&channel) else {
                return Err(Error::config(format!("synthetic.channels.{channel}"), "missing channel model"));
            };
            let (lo, hi) = bounds.get(channel);
            if !(m.mean > lo && m.mean < hi) {
                return Err(Error::config(
                    format!("synthetic.channels.{channel}.mean"),
                    "must lie inside the clinical bounds",
                ));
            }
            if !(m.sd >= 0.0 && m.patient_sd >= 0.0 && m.phi.abs() < 1.0) {
                return Err(Error::config(
                    format!("synthetic.channels.{channel}"),
                    "need sd >= 0, patient_sd >= 0 and |phi| < 1",
                ));
            }
        }
        Ok(())
    }
}

/// Generative variables kept for oracle checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthLatent {
    pub patient_id: String,
    pub favorable: bool,
    pub alive: bool,
    /// Planted EHR value before missingness.
    pub planted_ehr_value: f64,
    /// Realized standard deviation of the heart-rate bin levels.
    pub hr_level_sd: f64,
}

#[derive(Debug, Clone)]
pub struct SynthCohort {
    pub dataset: CohortDataset,
    pub labels: LabelTable,
    pub latent: Vec<SynthLatent>,
}

pub fn generate_synthetic_cohort(config: &SynthConfig, seed: u64) -> Result<(CohortDataset, LabelTable)> {
    let c = generate_synthetic_detailed(config, seed)?;
    Ok((c.dataset, c.labels))
}

pub fn patient_id(index: usize) -> String {
    format!("P{:05}", index + 1)
}

struct PatientDraw {
    record: PatientRecord,
    vitals: BTreeMap<Channel, RawSeries>,
    chart: BTreeMap<Channel, RawSeries>,
    ehr: Vec<Option<String>>,
    latent: SynthLatent,
}

pub fn generate_synthetic_detailed(config: &SynthConfig, seed: u64) -> Result<SynthCohort> {
    config.validate()?;
    let draws: Vec<PatientDraw> = (0..config.n_patients)
        .map(|i| draw_patient(config, seed, &patient_id(i)))
        .collect();

    let mut dataset = CohortDataset::default();
    let mut cells = Vec::with_capacity(draws.len());
    let mut latent = Vec::with_capacity(draws.len());
    for d in draws {
        let id = d.record.patient_id.clone();
        dataset.vitals.insert(id.clone(), d.vitals);
        dataset.chart.insert(id, d.chart);
        dataset.patients.push(d.record);
        cells.push(d.ehr);
        latent.push(d.latent);
    }
    let names: Vec<String> = EHR_COLUMNS.iter().map(|s| s.to_string()).collect();
    dataset.ehr = EhrTable::from_cells(
        dataset.patients.iter().map(|p| p.patient_id.clone()).collect(),
        &names,
        &cells,
        &["sex".to_string()],
    )?;
    let labels = derive_labels(&dataset)?;
    Ok(SynthCohort {
        dataset,
        labels,
        latent,
    })
}

fn round_to(v: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (v * s).round() / s
}

fn normal(rng: &mut StreamRng, mean: f64, sd: f64) -> f64 {
    if sd == 0.0 {
        return mean;
    }
    Normal::new(mean, sd).expect("finite sd").sample(rng)
}

fn out_of_bounds(rng: &mut StreamRng, lo: f64, hi: f64, above: bool) -> f64 {
    if above {
        round_to(hi + rng.random_range(5.0..60.0), 1)
    } else {
        round_to(lo * rng.random_range(0.2..0.9), 1)
    }
}

fn draw_patient(config: &SynthConfig, master: u64, id: &str) -> PatientDraw {
    let mut rng = seed::stream(master, &[seed::tag::COHORT, seed::hash_str(id)]);
    let bounds = BoundsTable::default();

    let favorable = rng.random::<f64>() < config.favorable_rate;
    let alive = favorable || rng.random::<f64>() >= config.death_rate_unfavorable;
    let mgcs = if favorable {
        Some(6)
    } else if alive {
        Some(rng.random_range(1..=5u8))
    } else {
        None
    };

    let mut icu_los_hours = round_to(24.5 + Exp::new(1.0 / 60.0).unwrap().sample(&mut rng), 2);
    let mut intubated = true;
    let mut outcome_offset_hours = round_to(rng.random_range(0.0..24.0), 2);
    if rng.random::<f64>() < config.ineligible_rate {
        match rng.random_range(0..3) {
            0 => icu_los_hours = round_to(rng.random_range(4.0..24.0), 2),
            1 => intubated = false,
            _ => outcome_offset_hours = round_to(rng.random_range(24.5..72.0), 2),
        }
    }

    let mut vitals = BTreeMap::new();
    let mut chart = BTreeMap::new();
    let mut hr_level_sd = 0.0;
    for channel in Channel::ALL {
        let model = config.channels[&channel];
        let (lo, hi) = bounds.get(channel);
        let patient_mean = normal(&mut rng, model.mean, model.patient_sd);
        let innovation = model.sd * (1.0 - model.phi * model.phi).sqrt();
        let mut state = normal(&mut rng, 0.0, model.sd);
        let mut truth = Vec::with_capacity(SLOTS_PER_DAY);
        for t in 0..SLOTS_PER_DAY {
            if t > 0 {
                state = model.phi * state + normal(&mut rng, 0.0, innovation);
            }
            truth.push(patient_mean + state);
        }
        if channel == Channel::Hr {
            let scale = 1.0 + if favorable { config.pts_effect } else { 0.0 };
            let levels: Vec<f64> = (0..config.n_bins)
                .map(|_| normal(&mut rng, 0.0, config.hr_bin_sd * scale))
                .collect();
            let bin_len = SLOTS_PER_DAY / config.n_bins;
            for (t, v) in truth.iter_mut().enumerate() {
                *v += levels[(t / bin_len).min(config.n_bins - 1)];
            }
            let m = levels.iter().sum::<f64>() / levels.len() as f64;
            hr_level_sd = (levels.iter().map(|l| (l - m).powi(2)).sum::<f64>()
                / (levels.len() - 1) as f64)
                .sqrt();
        }
        // keep the underlying physiology plausible; only artifacts leave the bounds
        for v in truth.iter_mut() {
            *v = round_to(v.clamp(lo + 0.5, hi), 1);
        }

        let mut observed: Vec<Option<f64>> = truth.iter().copied().map(Some).collect();
        let mut t = 0;
        while t < SLOTS_PER_DAY {
            let u = rng.random::<f64>();
            if u < config.spike_rate {
                let above = rng.random::<bool>();
                observed[t] = Some(out_of_bounds(&mut rng, lo, hi, above));
                t += 2;
            } else if u < config.spike_rate + config.artifact_run_rate {
                let len = rng.random_range(2..=6usize);
                let above = rng.random::<bool>();
                for slot in observed.iter_mut().skip(t).take(len) {
                    *slot = Some(out_of_bounds(&mut rng, lo, hi, above));
                }
                t += len + 1;
            } else {
                t += 1;
            }
        }
        let mut t = 0;
        while t < SLOTS_PER_DAY {
            if rng.random::<f64>() < config.gap_rate {
                let len = rng.random_range(config.gap_len.0..=config.gap_len.1);
                for slot in observed.iter_mut().skip(t).take(len) {
                    *slot = None;
                }
                t += len;
            } else {
                if rng.random::<f64>() < config.vitals_missing_rate {
                    observed[t] = None;
                }
                t += 1;
            }
        }
        let mut series = RawSeries::new();
        for (t, v) in observed.iter().enumerate() {
            let offset = (t * SLOT_MINUTES) as u32;
            match v {
                Some(v) => series.push((offset, Some(*v))),
                // missing slots are either absent or explicitly blank
                None => {
                    if rng.random::<bool>() {
                        series.push((offset, None));
                    }
                }
            }
        }
        vitals.insert(channel, series);

        let decorrelated = rng.random::<f64>() < config.chart_decorrelated_rate;
        let mut chart_series = RawSeries::new();
        for start in (0..SLOTS_PER_DAY).step_by(config.chart_interval_slots) {
            let slot = (start + rng.random_range(0..config.chart_interval_slots)).min(SLOTS_PER_DAY - 1);
            let minute = rng.random_range(0..SLOT_MINUTES);
            let value = if decorrelated {
                normal(&mut rng, model.mean, model.sd + model.patient_sd)
            } else {
                truth[slot] + normal(&mut rng, 0.0, config.chart_noise * model.sd)
            };
            if rng.random::<f64>() < config.chart_missing_rate {
                continue;
            }
            let offset = (slot * SLOT_MINUTES + minute) as u32;
            chart_series.push((offset, Some(round_to(value.clamp(lo, hi), 1))));
        }
        chart.insert(channel, chart_series);
    }

    let z = normal(&mut rng, 0.0, 1.0);
    let planted = 8.0 + 2.5 * (z + if favorable { config.ehr_effect } else { 0.0 });
    let lactate_mean = (normal(&mut rng, 3.0f64.ln(), 0.5)).exp();
    let values: [Option<String>; 12] = [
        Some(format!("{}", round_to(normal(&mut rng, 62.0, 15.0).clamp(18.0, 95.0), 0))),
        Some(if rng.random::<bool>() { "M" } else { "F" }.to_string()),
        Some(format!("{}", round_to(normal(&mut rng, 28.0, 6.0).max(14.0), 2))),
        Some(format!("{}", round_to(normal(&mut rng, 80.0, 25.0).max(0.0), 0))),
        Some(format!("{}", round_to(planted, 2))),
        Some(format!("{}", round_to(lactate_mean, 2))),
        Some(format!(
            "{}",
            round_to(lactate_mean * rng.random_range(1.1..1.6) + normal(&mut rng, 0.0, 0.3).abs(), 2)
        )),
        Some(format!("{}", round_to(normal(&mut rng, 140.0, 4.0), 1))),
        Some(format!("{}", round_to(normal(&mut rng, 4.2, 0.5), 2))),
        Some(format!("{}", round_to(normal(&mut rng, 0.7, 0.25).max(0.0), 2))),
        Some(format!("{}", round_to(normal(&mut rng, 37.5, 0.8), 1))),
        Some(format!("{}", round_to(normal(&mut rng, 0.5, 0.3).abs(), 3))),
    ];
    let ehr = values
        .into_iter()
        .zip(EHR_COLUMNS)
        .map(|(v, name)| {
            let rate = if name == SPARSE_COLUMN {
                config.sparse_missing_rate
            } else {
                config.ehr_missing_rate
            };
            if rng.random::<f64>() < rate {
                None
            } else {
                v
            }
        })
        .collect();

    PatientDraw {
        record: PatientRecord {
            patient_id: id.to_string(),
            icu_los_hours,
            intubated,
            outcome_offset_hours,
            discharge_status: if alive {
                DischargeStatus::Alive
            } else {
                DischargeStatus::Died
            },
            mgcs_at_discharge: mgcs,
        },
        vitals,
        chart,
        ehr,
        latent: SynthLatent {
            patient_id: id.to_string(),
            favorable,
            alive,
            planted_ehr_value: planted,
            hr_level_sd,
        },
    }
}
