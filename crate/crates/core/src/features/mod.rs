//! Statistical time-series features over the preprocessed 24-hour signals.

mod catalog;
pub mod stats;
pub mod symbolic;
pub mod wavelet;

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::provenance::{csv_reader, csv_writer, fmt_opt, Provenance};
use crate::pts::SignalMap;

pub use catalog::{default_windows, Catalog, FeatureDescriptor, Statistic};
pub use stats::{basic_stats, binned_stat, BasicStats, BinOuter};
pub use symbolic::{permutation_entropy, polvar};
pub use wavelet::{dwt_db3, idwt_db3, wavelet_feature, Decomposition, WaveletStat, DB3_LOWPASS};

/// Patients x named features, row-major, `None` for missing cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    pub patient_ids: Vec<String>,
    pub names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = Option<f64>> + '_ {
        self.rows.iter().map(move |r| r[j])
    }

    /// Column-wise concatenation of two matrices over the same patients.
    pub fn hstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.patient_ids != other.patient_ids {
            return Err(Error::SchemaMismatch("feature matrices cover different patients".into()));
        }
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        Ok(FeatureMatrix {
            patient_ids: self.patient_ids.clone(),
            names,
            rows: self
                .rows
                .iter()
                .zip(&other.rows)
                .map(|(a, b)| a.iter().chain(b).copied().collect())
                .collect(),
        })
    }

    pub fn select_rows(&self, ids: &[String]) -> Result<FeatureMatrix> {
        let index: std::collections::HashMap<&str, usize> = self
            .patient_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let rows = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .map(|&i| self.rows[i].clone())
                    .ok_or_else(|| Error::SchemaMismatch(format!("patient `{id}` has no feature row")))
            })
            .collect::<Result<_>>()?;
        Ok(FeatureMatrix {
            patient_ids: ids.to_vec(),
            names: self.names.clone(),
            rows,
        })
    }

    pub fn write_csv(&self, path: &Path, provenance: Option<&Provenance>) -> Result<()> {
        let mut w = csv_writer(path, provenance)?;
        let mut header = vec!["patient_id".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.patient_ids.iter().zip(&self.rows) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| fmt_opt(*v)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<FeatureMatrix> {
        let file = path.display().to_string();
        let mut r = csv_reader(path)?;
        let header = r.headers()?.clone();
        if header.get(0) != Some("patient_id") {
            return Err(Error::Schema {
                file,
                line: 1,
                message: "first column must be `patient_id`".into(),
            });
        }
        let mut m = FeatureMatrix {
            names: header.iter().skip(1).map(str::to_string).collect(),
            ..Default::default()
        };
        for rec in r.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            if rec.len() != header.len() {
                return Err(Error::Schema {
                    file,
                    line,
                    message: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            m.patient_ids.push(rec[0].to_string());
            let mut row = Vec::with_capacity(m.names.len());
            for s in rec.iter().skip(1) {
                row.push(match s {
                    "" => None,
                    s => Some(s.parse::<f64>().map_err(|_| Error::Schema {
                        file: file.clone(),
                        line,
                        message: format!("`{s}` is not a number"),
                    })?),
                });
            }
            m.rows.push(row);
        }
        Ok(m)
    }
}

fn patient_row(signals: Option<&std::collections::BTreeMap<crate::Channel, crate::pts::PtsSignal>>, catalog: &Catalog) -> Vec<Option<f64>> {
    catalog
        .descriptors()
        .iter()
        .map(|d| {
            let signal = signals?.get(&d.channel)?;
            let (s, e) = d.window;
            let window: Option<Vec<f64>> = signal.values()[s..e].iter().copied().collect();
            d.statistic.compute(&window?)
        })
        .collect()
}

/// One row per patient in `patient_ids` order, one column per descriptor.
/// Windows with any valueless slot yield missing cells.
pub fn extract_features(signals: &SignalMap, patient_ids: &[String], catalog: &Catalog) -> FeatureMatrix {
    extract_features_with(signals, patient_ids, catalog, true)
}

pub fn extract_features_with(
    signals: &SignalMap,
    patient_ids: &[String],
    catalog: &Catalog,
    parallel: bool,
) -> FeatureMatrix {
    let rows = if parallel {
        patient_ids
            .par_iter()
            .map(|id| patient_row(signals.get(id), catalog))
            .collect()
    } else {
        patient_ids
            .iter()
            .map(|id| patient_row(signals.get(id), catalog))
            .collect()
    };
    FeatureMatrix {
        patient_ids: patient_ids.to_vec(),
        names: catalog.names(),
        rows,
    }
}
