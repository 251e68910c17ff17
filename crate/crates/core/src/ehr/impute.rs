use serde::{Deserialize, Serialize};

use super::{ColumnData, EhrTable};
use crate::error::{Error, Result};
use crate::learners::forest::{fit_classifier, fit_regressor, ForestParams, Mtry};
use crate::seed::{self, tag};

pub const DEFAULT_DROP_THRESHOLD: f64 = 0.40;
pub const DEFAULT_ITERATIONS: usize = 5;
const IMPUTE_TREES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnAudit {
    pub name: String,
    pub categorical: bool,
    pub missing_fraction: f64,
    pub dropped: bool,
}

/// Missing fraction and drop decision for every column.
pub fn audit_columns(table: &EhrTable, threshold: f64) -> Vec<ColumnAudit> {
    table
        .columns
        .iter()
        .map(|c| {
            let missing_fraction = c.missing_fraction();
            ColumnAudit {
                name: c.name.clone(),
                categorical: c.is_categorical(),
                missing_fraction,
                dropped: missing_fraction > threshold,
            }
        })
        .collect()
}

/// Removes every column whose missing fraction is strictly above `threshold`.
pub fn drop_sparse_columns(table: &EhrTable, threshold: f64) -> EhrTable {
    EhrTable {
        patient_ids: table.patient_ids.clone(),
        columns: table
            .columns
            .iter()
            .filter(|c| c.missing_fraction() <= threshold)
            .cloned()
            .collect(),
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Most frequent code; ties go to the lowest code.
fn mode(codes: impl Iterator<Item = u32>, n_levels: usize) -> u32 {
    let mut counts = vec![0usize; n_levels];
    for c in codes {
        counts[c as usize] += 1;
    }
    let mut best = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = k;
        }
    }
    best as u32
}

/// Working copy: every cell filled, plus the original missing masks.
struct Filled {
    cols: Vec<Vec<f64>>,
    missing: Vec<Vec<usize>>,
}

fn initial_fill(table: &EhrTable) -> Result<Filled> {
    let mut cols = Vec::with_capacity(table.columns.len());
    let mut missing = Vec::with_capacity(table.columns.len());
    for c in &table.columns {
        let n = c.data.len();
        let miss: Vec<usize> = (0..n).filter(|&r| c.data.is_missing(r)).collect();
        if n > 0 && miss.len() == n {
            return Err(Error::InvalidInput(format!("EHR column `{}` has no observed values", c.name)));
        }
        let fill = match &c.data {
            ColumnData::Numeric(v) => {
                let mut obs: Vec<f64> = v.iter().flatten().copied().collect();
                if obs.is_empty() { 0.0 } else { median(&mut obs) }
            }
            ColumnData::Categorical { levels, codes } => {
                f64::from(mode(codes.iter().flatten().copied(), levels.len().max(1)))
            }
        };
        cols.push((0..n).map(|r| c.data.as_numeric(r).unwrap_or(fill)).collect());
        missing.push(miss);
    }
    Ok(Filled { cols, missing })
}

/// Iterative random-forest imputation of every missing cell.
///
/// Columns are visited in increasing order of missingness and updated in
/// place (each fit sees the latest values of the others). Categorical
/// predictors enter the forests by level code.
pub fn rf_impute(table: &EhrTable, n_iterations: usize, seed: u64) -> Result<EhrTable> {
    if n_iterations == 0 {
        return Err(Error::config("ehr.impute_iterations", "must be >= 1"));
    }
    let mut work = initial_fill(table)?;
    let mut order: Vec<usize> = (0..table.columns.len())
        .filter(|&j| !work.missing[j].is_empty())
        .collect();
    order.sort_by_key(|&j| work.missing[j].len());
    let n_cols = table.columns.len();
    if n_cols > 1 {
        for it in 0..n_iterations {
            for &j in &order {
                let miss = &work.missing[j];
                let observed: Vec<usize> = {
                    let mut is_missing = vec![false; table.n_rows()];
                    miss.iter().for_each(|&r| is_missing[r] = true);
                    (0..table.n_rows()).filter(|&r| !is_missing[r]).collect()
                };
                let predictors: Vec<usize> = (0..n_cols).filter(|&k| k != j).collect();
                let train: Vec<Vec<f64>> = predictors
                    .iter()
                    .map(|&k| observed.iter().map(|&r| work.cols[k][r]).collect())
                    .collect();
                let key = seed::derive(seed, &[tag::IMPUTE, it as u64, j as u64]);
                let (cols, preds) = (&work.cols, &predictors);
                let row = |r: usize| move |f: usize| cols[preds[f]][r];
                let predicted: Vec<f64> = match &table.columns[j].data {
                    ColumnData::Numeric(_) => {
                        let y: Vec<f64> = observed.iter().map(|&r| work.cols[j][r]).collect();
                        let params = ForestParams {
                            n_trees: IMPUTE_TREES,
                            mtry: Mtry::Third,
                            min_leaf: 5,
                            ..ForestParams::default()
                        };
                        let forest = fit_regressor(&train, &y, &params, key);
                        miss.iter().map(|&r| forest.predict_row(row(r))[0]).collect()
                    }
                    ColumnData::Categorical { levels, .. } => {
                        let y: Vec<u32> = observed.iter().map(|&r| work.cols[j][r] as u32).collect();
                        let params = ForestParams {
                            n_trees: IMPUTE_TREES,
                            mtry: Mtry::Sqrt,
                            min_leaf: 1,
                            ..ForestParams::default()
                        };
                        let forest = fit_classifier(&train, &y, levels.len(), &params, key);
                        miss.iter()
                            .map(|&r| {
                                let mut votes = vec![0usize; levels.len()];
                                for t in &forest.trees {
                                    let leaf = t.leaf_value(row(r));
                                    let mut best = 0;
                                    for (k, &v) in leaf.iter().enumerate() {
                                        if v > leaf[best] {
                                            best = k;
                                        }
                                    }
                                    votes[best] += 1;
                                }
                                f64::from(mode_of_votes(&votes))
                            })
                            .collect()
                    }
                };
                for (&r, v) in miss.iter().zip(predicted) {
                    work.cols[j][r] = v;
                }
            }
        }
    }
    let columns = table
        .columns
        .iter()
        .zip(work.cols)
        .map(|(c, filled)| {
            let data = match &c.data {
                ColumnData::Numeric(v) => {
                    ColumnData::Numeric(v.iter().zip(&filled).map(|(o, f)| Some(o.unwrap_or(*f))).collect())
                }
                ColumnData::Categorical { levels, codes } => ColumnData::Categorical {
                    levels: levels.clone(),
                    codes: codes.iter().zip(&filled).map(|(o, f)| Some(o.unwrap_or(*f as u32))).collect(),
                },
            };
            super::EhrColumn { name: c.name.clone(), data }
        })
        .collect();
    Ok(EhrTable {
        patient_ids: table.patient_ids.clone(),
        columns,
    })
}

fn mode_of_votes(votes: &[usize]) -> u32 {
    let mut best = 0;
    for (k, &v) in votes.iter().enumerate() {
        if v > votes[best] {
            best = k;
        }
    }
    best as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ehr::EhrColumn;

    fn numeric(name: &str, v: Vec<Option<f64>>) -> EhrColumn {
        EhrColumn {
            name: name.into(),
            data: ColumnData::Numeric(v),
        }
    }

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i}")).collect()
    }

    #[test]
    fn drop_rule_is_strict() {
        let mut a = vec![Some(1.0); 100];
        let mut b = vec![Some(1.0); 100];
        a[..41].iter_mut().for_each(|v| *v = None);
        b[..40].iter_mut().for_each(|v| *v = None);
        let t = EhrTable {
            patient_ids: ids(100),
            columns: vec![numeric("a", a), numeric("b", b)],
        };
        let out = drop_sparse_columns(&t, DEFAULT_DROP_THRESHOLD);
        assert_eq!(out.columns.len(), 1);
        assert_eq!(out.columns[0].name, "b");
        let audit = audit_columns(&t, DEFAULT_DROP_THRESHOLD);
        assert!(audit[0].dropped && !audit[1].dropped);
    }

    #[test]
    fn complete_table_is_untouched() {
        let t = EhrTable {
            patient_ids: ids(4),
            columns: vec![
                numeric("a", vec![Some(1.0), Some(2.0), Some(3.0), Some(4.0)]),
                numeric("b", vec![Some(0.5), Some(0.1), Some(0.2), Some(0.3)]),
            ],
        };
        assert_eq!(drop_sparse_columns(&t, 0.4), t);
        assert_eq!(rf_impute(&t, 5, 1).unwrap(), t);
    }

    #[test]
    fn empty_column_is_an_error() {
        let t = EhrTable {
            patient_ids: ids(2),
            columns: vec![numeric("a", vec![None, None]), numeric("b", vec![Some(1.0), Some(2.0)])],
        };
        assert!(rf_impute(&t, 1, 0).is_err());
    }

    #[test]
    fn categorical_cells_are_filled_with_known_levels() {
        let n = 40;
        let codes: Vec<Option<u32>> = (0..n).map(|i| if i % 7 == 0 { None } else { Some((i % 2) as u32) }).collect();
        let x: Vec<Option<f64>> = (0..n).map(|i| Some((i % 2) as f64 * 10.0 + i as f64 * 0.01)).collect();
        let t = EhrTable {
            patient_ids: ids(n),
            columns: vec![
                EhrColumn {
                    name: "sex".into(),
                    data: ColumnData::Categorical {
                        levels: vec!["F".into(), "M".into()],
                        codes: codes.clone(),
                    },
                },
                numeric("x", x),
            ],
        };
        let out = rf_impute(&t, 2, 9).unwrap();
        assert_eq!(out.n_missing(), 0);
        let ColumnData::Categorical { codes: filled, .. } = &out.columns[0].data else { panic!() };
        for i in 0..n {
            assert_eq!(filled[i], Some((i % 2) as u32), "row {i}");
        }
    }
}
