use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::provenance::{csv_reader, csv_writer, fmt_f64, Provenance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ColumnData {
    Numeric(Vec<Option<f64>>),
    /// Codes index into `levels`, which are kept sorted.
    Categorical {
        levels: Vec<String>,
        codes: Vec<Option<u32>>,
    },
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Numeric(v) => v.len(),
            ColumnData::Categorical { codes, .. } => codes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            ColumnData::Numeric(v) => v[row].is_none(),
            ColumnData::Categorical { codes, .. } => codes[row].is_none(),
        }
    }

    pub fn n_missing(&self) -> usize {
        (0..self.len()).filter(|&r| self.is_missing(r)).count()
    }

    /// Numeric view used as a tree predictor; categoricals are exposed by code.
    pub fn as_numeric(&self, row: usize) -> Option<f64> {
        match self {
            ColumnData::Numeric(v) => v[row],
            ColumnData::Categorical { codes, .. } => codes[row].map(f64::from),
        }
    }

    fn select(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Numeric(v) => ColumnData::Numeric(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Categorical { levels, codes } => ColumnData::Categorical {
                levels: levels.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhrColumn {
    pub name: String,
    pub data: ColumnData,
}

impl EhrColumn {
    pub fn missing_fraction(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.n_missing() as f64 / self.data.len() as f64
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.data, ColumnData::Categorical { .. })
    }
}

/// Patient-indexed table of static EHR variables with explicit missing cells.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EhrTable {
    pub patient_ids: Vec<String>,
    pub columns: Vec<EhrColumn>,
}

impl EhrTable {
    pub fn n_rows(&self) -> usize {
        self.patient_ids.len()
    }

    pub fn column(&self, name: &str) -> Option<&EhrColumn> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn n_missing(&self) -> usize {
        self.columns.iter().map(|c| c.data.n_missing()).sum()
    }

    /// Builds a table from string cells; columns named in `categorical` keep
    /// their text levels, everything else must parse as a number.
    pub fn from_cells(
        patient_ids: Vec<String>,
        names: &[String],
        cells: &[Vec<Option<String>>],
        categorical: &[String],
    ) -> Result<EhrTable> {
        let mut columns = Vec::with_capacity(names.len());
        for (j, name) in names.iter().enumerate() {
            let raw: Vec<Option<&str>> = cells.iter().map(|row| row[j].as_deref()).collect();
            let data = if categorical.iter().any(|c| c == name) {
                let levels: Vec<String> = raw
                    .iter()
                    .flatten()
                    .map(|s| s.to_string())
                    .collect::<BTreeSet<_>>()
                    .into_iter()
                    .collect();
                let index: HashMap<&str, u32> = levels
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (l.as_str(), i as u32))
                    .collect();
                ColumnData::Categorical {
                    codes: raw.iter().map(|c| c.map(|s| index[s])).collect(),
                    levels,
                }
            } else {
                let mut values = Vec::with_capacity(raw.len());
                for (i, cell) in raw.iter().enumerate() {
                    values.push(match cell {
                        None => None,
                        Some(s) => Some(s.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(
                            || {
                                Error::SchemaMismatch(format!(
                                    "EHR column `{name}` row {} (patient `{}`): `{s}` is not a finite number",
                                    i + 1,
                                    patient_ids[i]
                                ))
                            },
                        )?),
                    });
                }
                ColumnData::Numeric(values)
            };
            columns.push(EhrColumn {
                name: name.clone(),
                data,
            });
        }
        Ok(EhrTable {
            patient_ids,
            columns,
        })
    }

    /// Keeps the rows whose patient id satisfies `keep`, preserving order.
    pub fn retain_rows(&self, mut keep: impl FnMut(&str) -> bool) -> EhrTable {
        let rows: Vec<usize> = (0..self.n_rows())
            .filter(|&r| keep(&self.patient_ids[r]))
            .collect();
        self.select_rows(&rows)
    }

    pub fn select_rows(&self, rows: &[usize]) -> EhrTable {
        EhrTable {
            patient_ids: rows.iter().map(|&r| self.patient_ids[r].clone()).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| EhrColumn {
                    name: c.name.clone(),
                    data: c.data.select(rows),
                })
                .collect(),
        }
    }

    pub fn cell_text(&self, row: usize, col: usize) -> String {
        match &self.columns[col].data {
            ColumnData::Numeric(v) => v[row].map(fmt_f64).unwrap_or_default(),
            ColumnData::Categorical { levels, codes } => codes[row]
                .map(|c| levels[c as usize].clone())
                .unwrap_or_default(),
        }
    }

    pub fn write_csv(&self, path: &Path, provenance: Option<&Provenance>) -> Result<()> {
        let mut w = csv_writer(path, provenance)?;
        let mut header = vec!["patient_id".to_string()];
        header.extend(self.columns.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for row in 0..self.n_rows() {
            let mut rec = vec![self.patient_ids[row].clone()];
            rec.extend((0..self.columns.len()).map(|c| self.cell_text(row, c)));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a table written by [`EhrTable::write_csv`] (or any `patient_id, ...` CSV).
    pub fn read_csv(path: &Path, categorical: &[String]) -> Result<EhrTable> {
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
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut ids = Vec::new();
        let mut cells = Vec::new();
        let mut seen = std::collections::HashSet::new();
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
            let id = rec[0].to_string();
            if !seen.insert(id.clone()) {
                return Err(Error::Schema {
                    file,
                    line,
                    message: format!("duplicate patient_id `{id}`"),
                });
            }
            ids.push(id);
            cells.push(
                rec.iter()
                    .skip(1)
                    .map(|s| (!s.is_empty()).then(|| s.to_string()))
                    .collect::<Vec<_>>(),
            );
        }
        EhrTable::from_cells(ids, &names, &cells, categorical).map_err(|e| match e {
            Error::SchemaMismatch(m) => Error::Schema {
                file: file.clone(),
                line: 0,
                message: m,
            },
            other => other,
        })
    }
}
