use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    CohortDataset, DischargeStatus, LabelEntry, LabelTable, NeuroLabel, PatientRecord, SeriesMap,
};
use crate::channel::Channel;
use crate::ehr::EhrTable;
use crate::error::{Error, Result};
use crate::provenance::{csv_reader, csv_writer, fmt_f64, fmt_opt, Provenance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CohortPaths {
    pub patients: PathBuf,
    pub vitals: PathBuf,
    pub chart: PathBuf,
    pub ehr: PathBuf,
}

impl CohortPaths {
    pub fn in_dir(dir: &Path) -> CohortPaths {
        CohortPaths {
            patients: dir.join("patients.csv"),
            vitals: dir.join("vitals.csv"),
            chart: dir.join("chart.csv"),
            ehr: dir.join("ehr.csv"),
        }
    }
}

const PATIENT_HEADER: [&str; 6] = [
    "patient_id",
    "icu_los_hours",
    "intubated",
    "outcome_offset_hours",
    "discharge_status",
    "mgcs_at_discharge",
];
const SERIES_HEADER: [&str; 4] = ["patient_id", "channel", "offset_minutes", "value"];
const LABEL_HEADER: [&str; 3] = ["patient_id", "neuro_label", "survival_label"];

fn schema(file: &str, line: u64, message: impl Into<String>) -> Error {
    Error::Schema {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

fn check_header(file: &str, found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = found.iter().collect();
    if got != expected {
        return Err(schema(
            file,
            1,
            format!("expected columns {expected:?}, found {got:?}"),
        ));
    }
    Ok(())
}

fn parse_f64(file: &str, line: u64, field: &str, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| schema(file, line, format!("`{field}`: `{s}` is not a finite number")))
}

fn read_patients(path: &Path) -> Result<Vec<PatientRecord>> {
    let file = path.display().to_string();
    let mut r = csv_reader(path)?;
    check_header(&file, r.headers()?, &PATIENT_HEADER)?;
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != PATIENT_HEADER.len() {
            return Err(schema(&file, line, format!("expected 6 fields, found {}", rec.len())));
        }
        let id = rec[0].to_string();
        if id.is_empty() {
            return Err(schema(&file, line, "empty patient_id"));
        }
        if !seen.insert(id.clone()) {
            return Err(schema(&file, line, format!("duplicate patient_id `{id}`")));
        }
        let icu_los_hours = parse_f64(&file, line, "icu_los_hours", &rec[1])?;
        if icu_los_hours < 0.0 {
            return Err(schema(&file, line, "`icu_los_hours` must be non-negative"));
        }
        let intubated = match &rec[2] {
            "0" => false,
            "1" => true,
            s => return Err(schema(&file, line, format!("`intubated`: expected 0 or 1, found `{s}`"))),
        };
        let outcome_offset_hours = parse_f64(&file, line, "outcome_offset_hours", &rec[3])?;
        let discharge_status = match &rec[4] {
            "alive" => DischargeStatus::Alive,
            "died" => DischargeStatus::Died,
            s => {
                return Err(schema(
                    &file,
                    line,
                    format!("`discharge_status`: expected alive or died, found `{s}`"),
                ))
            }
        };
        let mgcs_at_discharge = match &rec[5] {
            "" => None,
            s => match s.parse::<u8>() {
                Ok(v @ 1..=6) => Some(v),
                _ => {
                    return Err(schema(
                        &file,
                        line,
                        format!("`mgcs_at_discharge`: expected integer 1..6, found `{s}`"),
                    ))
                }
            },
        };
        out.push(PatientRecord {
            patient_id: id,
            icu_los_hours,
            intubated,
            outcome_offset_hours,
            discharge_status,
            mgcs_at_discharge,
        });
    }
    Ok(out)
}

fn read_series(path: &Path, known: &BTreeSet<String>) -> Result<SeriesMap> {
    let file = path.display().to_string();
    let mut r = csv_reader(path)?;
    check_header(&file, r.headers()?, &SERIES_HEADER)?;
    let mut out = SeriesMap::new();
    let mut seen: BTreeSet<(String, Channel, u32)> = BTreeSet::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != SERIES_HEADER.len() {
            return Err(schema(&file, line, format!("expected 4 fields, found {}", rec.len())));
        }
        let id = rec[0].to_string();
        if !known.contains(&id) {
            return Err(schema(&file, line, format!("patient `{id}` not in patients table")));
        }
        let channel: Channel = rec[1].parse().map_err(|_| Error::UnknownChannel {
            file: file.clone(),
            line,
            name: rec[1].to_string(),
        })?;
        let offset: u32 = rec[2].parse().map_err(|_| {
            schema(
                &file,
                line,
                format!("`offset_minutes`: expected non-negative integer, found `{}`", &rec[2]),
            )
        })?;
        let value = match &rec[3] {
            "" => None,
            s => Some(parse_f64(&file, line, "value", s)?),
        };
        if !seen.insert((id.clone(), channel, offset)) {
            return Err(Error::DuplicateRow {
                file: file.clone(),
                line,
                patient_id: id,
                channel: channel.to_string(),
                offset,
            });
        }
        out.entry(id)
            .or_default()
            .entry(channel)
            .or_default()
            .push((offset, value));
    }
    for channels in out.values_mut() {
        for series in channels.values_mut() {
            series.sort_by_key(|&(o, _)| o);
        }
    }
    Ok(out)
}

/// Reads the four cohort CSVs and cross-references them against the patients table.
///
/// EHR rows are reordered to follow `patients.csv`; patients without an EHR
/// row get an all-missing row.
pub fn load_cohort(paths: &CohortPaths, categorical: &[String]) -> Result<CohortDataset> {
    let patients = read_patients(&paths.patients)?;
    let known: BTreeSet<String> = patients.iter().map(|p| p.patient_id.clone()).collect();
    let vitals = read_series(&paths.vitals, &known)?;
    let chart = read_series(&paths.chart, &known)?;
    let ehr_raw = EhrTable::read_csv(&paths.ehr, categorical)?;
    if let Some(id) = ehr_raw.patient_ids.iter().find(|id| !known.contains(*id)) {
        return Err(schema(
            &paths.ehr.display().to_string(),
            0,
            format!("patient `{id}` not in patients table"),
        ));
    }
    let position: BTreeMap<&str, usize> = ehr_raw
        .patient_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let ehr = if patients
        .iter()
        .map(|p| p.patient_id.as_str())
        .eq(ehr_raw.patient_ids.iter().map(String::as_str))
    {
        ehr_raw
    } else {
        reindex(&ehr_raw, &patients, &position)
    };
    Ok(CohortDataset {
        patients,
        vitals,
        chart,
        ehr,
    })
}

fn reindex(
    table: &EhrTable,
    patients: &[PatientRecord],
    position: &BTreeMap<&str, usize>,
) -> EhrTable {
    use crate::ehr::{ColumnData, EhrColumn};
    let rows: Vec<Option<usize>> = patients
        .iter()
        .map(|p| position.get(p.patient_id.as_str()).copied())
        .collect();
    EhrTable {
        patient_ids: patients.iter().map(|p| p.patient_id.clone()).collect(),
        columns: table
            .columns
            .iter()
            .map(|c| EhrColumn {
                name: c.name.clone(),
                data: match &c.data {
                    ColumnData::Numeric(v) => {
                        ColumnData::Numeric(rows.iter().map(|r| r.and_then(|r| v[r])).collect())
                    }
                    ColumnData::Categorical { levels, codes } => ColumnData::Categorical {
                        levels: levels.clone(),
                        codes: rows.iter().map(|r| r.and_then(|r| codes[r])).collect(),
                    },
                },
            })
            .collect(),
    }
}

fn write_series(path: &Path, series: &SeriesMap, provenance: Option<&Provenance>) -> Result<()> {
    let mut w = csv_writer(path, provenance)?;
    w.write_record(SERIES_HEADER)?;
    for (id, channels) in series {
        for (channel, obs) in channels {
            for &(offset, value) in obs {
                w.write_record([
                    id.as_str(),
                    channel.as_str(),
                    &offset.to_string(),
                    &fmt_opt(value),
                ])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes the dataset in the same four-file layout [`load_cohort`] reads.
pub fn write_cohort(
    dataset: &CohortDataset,
    paths: &CohortPaths,
    provenance: Option<&Provenance>,
) -> Result<()> {
    let mut w = csv_writer(&paths.patients, provenance)?;
    w.write_record(PATIENT_HEADER)?;
    for p in &dataset.patients {
        w.write_record([
            p.patient_id.as_str(),
            &fmt_f64(p.icu_los_hours),
            if p.intubated { "1" } else { "0" },
            &fmt_f64(p.outcome_offset_hours),
            p.discharge_status.as_str(),
            &p.mgcs_at_discharge.map(|m| m.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&paths.patients, e))?;
    write_series(&paths.vitals, &dataset.vitals, provenance)?;
    write_series(&paths.chart, &dataset.chart, provenance)?;
    dataset.ehr.write_csv(&paths.ehr, provenance)
}

pub fn write_labels(labels: &LabelTable, path: &Path, provenance: Option<&Provenance>) -> Result<()> {
    let mut w = csv_writer(path, provenance)?;
    w.write_record(LABEL_HEADER)?;
    for e in &labels.entries {
        w.write_record([e.patient_id.as_str(), e.neuro.as_str(), e.survival.as_str()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_labels(path: &Path) -> Result<LabelTable> {
    let file = path.display().to_string();
    let mut r = csv_reader(path)?;
    check_header(&file, r.headers()?, &LABEL_HEADER)?;
    let mut entries = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        if rec.len() != 3 {
            return Err(schema(&file, line, format!("expected 3 fields, found {}", rec.len())));
        }
        let neuro = match &rec[1] {
            "favorable" => NeuroLabel::Favorable,
            "unfavorable" => NeuroLabel::Unfavorable,
            s => return Err(schema(&file, line, format!("unknown neuro_label `{s}`"))),
        };
        let survival = match &rec[2] {
            "alive" => DischargeStatus::Alive,
            "died" => DischargeStatus::Died,
            s => return Err(schema(&file, line, format!("unknown survival_label `{s}`"))),
        };
        entries.push(LabelEntry {
            patient_id: rec[0].to_string(),
            neuro,
            survival,
        });
    }
    Ok(LabelTable { entries })
}
