//! Cohort ingestion, inclusion criteria, outcome labels and synthetic cohorts.

mod io;
mod synth;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::channel::Channel;
use crate::ehr::EhrTable;
use crate::error::{Error, Result};

pub use io::{load_cohort, read_labels, write_cohort, write_labels, CohortPaths};
pub use synth::{
    generate_synthetic_cohort, generate_synthetic_detailed, ChannelModel, SynthCohort, SynthConfig,
    SynthLatent, PLANTED_EHR_COLUMN,
};

/// Minimum ICU stay, in hours, for inclusion (strict).
pub const MIN_ICU_LOS_HOURS: f64 = 24.0;
/// Maximum delay, in hours before discharge, of the outcome assessment.
pub const MAX_OUTCOME_OFFSET_HOURS: f64 = 24.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DischargeStatus {
    Alive,
    Died,
}

impl DischargeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            DischargeStatus::Alive => "alive",
            DischargeStatus::Died => "died",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatientRecord {
    pub patient_id: String,
    pub icu_los_hours: f64,
    pub intubated: bool,
    pub outcome_offset_hours: f64,
    pub discharge_status: DischargeStatus,
    pub mgcs_at_discharge: Option<u8>,
}

/// Raw observations for one channel: `(offset_minutes, value)`, sorted by
/// offset, `None` marking an explicitly blank cell.
pub type RawSeries = Vec<(u32, Option<f64>)>;

pub type SeriesMap = BTreeMap<String, BTreeMap<Channel, RawSeries>>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CohortDataset {
    pub patients: Vec<PatientRecord>,
    pub vitals: SeriesMap,
    pub chart: SeriesMap,
    pub ehr: EhrTable,
}

impl CohortDataset {
    pub fn patient_ids(&self) -> Vec<&str> {
        self.patients.iter().map(|p| p.patient_id.as_str()).collect()
    }

    /// Checks that every series/EHR row refers to a known patient.
    pub fn check_references(&self) -> Result<()> {
        let known: BTreeSet<&str> = self.patient_ids().into_iter().collect();
        let stray = self
            .vitals
            .keys()
            .chain(self.chart.keys())
            .chain(self.ehr.patient_ids.iter())
            .find(|id| !known.contains(id.as_str()));
        match stray {
            Some(id) => Err(Error::InvalidInput(format!("patient `{id}` not in patients table"))),
            None => Ok(()),
        }
    }
}

pub fn is_eligible(p: &PatientRecord) -> bool {
    p.icu_los_hours > MIN_ICU_LOS_HOURS
        && p.intubated
        && p.outcome_offset_hours <= MAX_OUTCOME_OFFSET_HOURS
}

/// Applies the inclusion criteria, filtering every per-patient map consistently.
pub fn select_patients(dataset: &CohortDataset) -> CohortDataset {
    let patients: Vec<PatientRecord> = dataset
        .patients
        .iter()
        .filter(|p| is_eligible(p))
        .cloned()
        .collect();
    let keep: BTreeSet<String> = patients.iter().map(|p| p.patient_id.clone()).collect();
    let filter = |m: &SeriesMap| -> SeriesMap {
        m.iter()
            .filter(|(id, _)| keep.contains(*id))
            .map(|(id, s)| (id.clone(), s.clone()))
            .collect()
    };
    CohortDataset {
        vitals: filter(&dataset.vitals),
        chart: filter(&dataset.chart),
        ehr: dataset.ehr.retain_rows(|id| keep.contains(id)),
        patients,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NeuroLabel {
    Favorable,
    Unfavorable,
}

impl NeuroLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            NeuroLabel::Favorable => "favorable",
            NeuroLabel::Unfavorable => "unfavorable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub patient_id: String,
    pub neuro: NeuroLabel,
    pub survival: DischargeStatus,
}

/// Outcome labels in cohort order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LabelTable {
    pub entries: Vec<LabelEntry>,
}

/// Which outcome a model is trained on. Positive class is the good outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    #[default]
    Neuro,
    Survival,
}

impl LabelTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// 1 = favorable (or alive), 0 otherwise.
    pub fn targets(&self, outcome: Outcome) -> Vec<u8> {
        self.entries
            .iter()
            .map(|e| match outcome {
                Outcome::Neuro => u8::from(e.neuro == NeuroLabel::Favorable),
                Outcome::Survival => u8::from(e.survival == DischargeStatus::Alive),
            })
            .collect()
    }

    pub fn get(&self, patient_id: &str) -> Option<&LabelEntry> {
        self.entries.iter().find(|e| e.patient_id == patient_id)
    }

    pub fn count_favorable(&self) -> usize {
        self.entries
            .iter()
            .filter(|e| e.neuro == NeuroLabel::Favorable)
            .count()
    }
}

/// Dichotomizes discharge motor GCS: favorable iff mGCS = 6 and alive.
pub fn derive_labels(dataset: &CohortDataset) -> Result<LabelTable> {
    let missing: Vec<String> = dataset
        .patients
        .iter()
        .filter(|p| p.discharge_status == DischargeStatus::Alive && p.mgcs_at_discharge.is_none())
        .map(|p| p.patient_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Labeling {
            patient_ids: missing,
        });
    }
    let entries = dataset
        .patients
        .iter()
        .map(|p| {
            let neuro = match (p.discharge_status, p.mgcs_at_discharge) {
                (DischargeStatus::Alive, Some(6)) => NeuroLabel::Favorable,
                _ => NeuroLabel::Unfavorable,
            };
            LabelEntry {
                patient_id: p.patient_id.clone(),
                neuro,
                survival: p.discharge_status,
            }
        })
        .collect();
    Ok(LabelTable { entries })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn patient(id: &str, los: f64, intubated: bool, offset: f64) -> PatientRecord {
        PatientRecord {
            patient_id: id.into(),
            icu_los_hours: los,
            intubated,
            outcome_offset_hours: offset,
            discharge_status: DischargeStatus::Alive,
            mgcs_at_discharge: Some(6),
        }
    }

    fn dataset(patients: Vec<PatientRecord>) -> CohortDataset {
        let ids: Vec<String> = patients.iter().map(|p| p.patient_id.clone()).collect();
        let mut vitals = SeriesMap::new();
        for id in &ids {
            vitals
                .entry(id.clone())
                .or_default()
                .insert(Channel::Hr, vec![(0, Some(80.0))]);
        }
        CohortDataset {
            ehr: EhrTable {
                patient_ids: ids,
                columns: vec![],
            },
            vitals,
            chart: SeriesMap::new(),
            patients,
        }
    }

    #[test]
    fn inclusion_criteria() {
        let ds = dataset(vec![
            patient("short", 23.0, true, 1.0),
            patient("not_intubated", 48.0, false, 1.0),
            patient("ok", 48.0, true, 10.0),
            patient("stale_outcome", 48.0, true, 30.0),
            patient("boundary", 24.0, true, 24.0),
        ]);
        let sel = select_patients(&ds);
        assert_eq!(sel.patient_ids(), vec!["ok"]);
        assert_eq!(sel.vitals.keys().collect::<Vec<_>>(), vec!["ok"]);
        assert_eq!(sel.ehr.patient_ids, vec!["ok".to_string()]);
        assert_eq!(select_patients(&sel), sel);
    }

    #[test]
    fn label_rules() {
        let mut ds = dataset(vec![
            patient("a", 48.0, true, 1.0),
            patient("b", 48.0, true, 1.0),
            patient("c", 48.0, true, 1.0),
        ]);
        ds.patients[1].mgcs_at_discharge = Some(5);
        ds.patients[2].discharge_status = DischargeStatus::Died;
        let labels = derive_labels(&ds).unwrap();
        let got: Vec<_> = labels.entries.iter().map(|e| (e.neuro, e.survival)).collect();
        assert_eq!(
            got,
            vec![
                (NeuroLabel::Favorable, DischargeStatus::Alive),
                (NeuroLabel::Unfavorable, DischargeStatus::Alive),
                (NeuroLabel::Unfavorable, DischargeStatus::Died),
            ]
        );
        assert_eq!(labels.targets(Outcome::Neuro), vec![1, 0, 0]);
        assert_eq!(labels.targets(Outcome::Survival), vec![1, 1, 0]);
    }

    #[test]
    fn survivor_without_mgcs_is_an_error() {
        let mut ds = dataset(vec![patient("a", 48.0, true, 1.0), patient("b", 48.0, true, 1.0)]);
        ds.patients[1].mgcs_at_discharge = None;
        match derive_labels(&ds) {
            Err(Error::Labeling { patient_ids }) => assert_eq!(patient_ids, vec!["b".to_string()]),
            other => panic!("expected labeling error, got {other:?}"),
        }
        ds.patients[1].discharge_status = DischargeStatus::Died;
        assert!(derive_labels(&ds).is_ok());
    }
}
