//! Feature importance: forest minimal depth, univariable logistic signs and
//! category tags.

use std::fmt;
use std::path::Path;

use rayon::prelude::*;
use regex::Regex;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::learners::linear::sigmoid;
use crate::learners::{check_labels, DesignMatrix, TrainedModel};
use crate::provenance::{csv_writer, fmt_f64, Provenance};

/// Mean minimal split depth per feature (root = 0). A tree that never splits
/// on a feature contributes its own max depth + 1.
pub fn min_depth_importance(model: &TrainedModel) -> Result<Vec<(String, f64)>> {
    let forest = model
        .forest()
        .ok_or_else(|| Error::InvalidInput(format!("minimal depth needs a random forest, got {}", model.learner)))?;
    let p = model.feature_names.len();
    let per_tree: Vec<Vec<f64>> = forest
        .trees
        .par_iter()
        .map(|t| {
            let sentinel = (t.max_depth() + 1) as f64;
            t.min_split_depths(p)
                .into_iter()
                .map(|d| d.map_or(sentinel, |d| d as f64))
                .collect()
        })
        .collect();
    let k = per_tree.len() as f64;
    Ok(model
        .feature_names
        .iter()
        .enumerate()
        .map(|(j, name)| (name.clone(), per_tree.iter().map(|d| d[j]).sum::<f64>() / k))
        .collect())
}

/// RI = (d_max - d) / (d_max - d_min); all zeros when depths are constant.
pub fn normalize_importance(depths: &[(String, f64)]) -> Vec<(String, f64)> {
    let lo = depths.iter().map(|d| d.1).fold(f64::INFINITY, f64::min);
    let hi = depths.iter().map(|d| d.1).fold(f64::NEG_INFINITY, f64::max);
    depths
        .iter()
        .map(|(name, d)| {
            let ri = if hi > lo { (hi - d) / (hi - lo) } else { 0.0 };
            (name.clone(), ri)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Positive,
    #[serde(rename = "-")]
    Negative,
    #[serde(rename = "0")]
    Zero,
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Positive => "+",
            Sign::Negative => "-",
            Sign::Zero => "0",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Univariable {
    pub sign: Sign,
    pub slope: f64,
    pub p_value: f64,
}

/// Ridge on the standardized slope (summed-loss scale) that keeps the fit
/// finite under perfect separation while being negligible otherwise.
pub const UNIVARIABLE_RIDGE: f64 = 1.0;

/// Logistic fit of `y` on one standardized covariate with intercept, by Newton's method.
fn single_logistic(x: &[f64], y: &[u8]) -> (f64, f64) {
    let (mut b0, mut b1) = (0.0, 0.0);
    let mut info = [[0.0; 2]; 2];
    for _ in 0..200 {
        let (mut g0, mut g1) = (0.0, -UNIVARIABLE_RIDGE * b1);
        info = [[0.0, 0.0], [0.0, UNIVARIABLE_RIDGE]];
        for (&xi, &yi) in x.iter().zip(y) {
            let p = sigmoid(b0 + b1 * xi);
            let r = f64::from(yi) - p;
            let w = p * (1.0 - p);
            g0 += r;
            g1 += r * xi;
            info[0][0] += w;
            info[0][1] += w * xi;
            info[1][1] += w * xi * xi;
        }
        info[1][0] = info[0][1];
        let det = info[0][0] * info[1][1] - info[0][1] * info[0][1];
        if det <= 0.0 {
            break;
        }
        let d0 = (info[1][1] * g0 - info[0][1] * g1) / det;
        let d1 = (info[0][0] * g1 - info[0][1] * g0) / det;
        b0 += d0;
        b1 += d1;
        if d0.abs().max(d1.abs()) < 1e-12 {
            break;
        }
    }
    let det = info[0][0] * info[1][1] - info[0][1] * info[0][1];
    let var_b1 = if det > 0.0 { info[0][0] / det } else { f64::INFINITY };
    (b1, var_b1)
}

/// Per-feature slope sign and Wald p-value of a one-covariate logistic model.
pub fn univariable_sign(x: &DesignMatrix, y: &[u8]) -> Result<Vec<Univariable>> {
    check_labels(y, x.n_rows())?;
    let normal = Normal::standard();
    Ok(x.cols()
        .par_iter()
        .map(|col| {
            let n = col.len() as f64;
            if col.iter().all(|&v| v == col[0]) {
                return Univariable {
                    sign: Sign::Zero,
                    slope: 0.0,
                    p_value: 1.0,
                };
            }
            let mean = col.iter().sum::<f64>() / n;
            let sd = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            let z: Vec<f64> = col.iter().map(|v| (v - mean) / sd).collect();
            let (slope, var) = single_logistic(&z, y);
            let p_value = if var.is_finite() && var > 0.0 {
                (2.0 * normal.cdf(-(slope / var.sqrt()).abs())).min(1.0)
            } else {
                1.0
            };
            let sign = if slope > 0.0 {
                Sign::Positive
            } else if slope < 0.0 {
                Sign::Negative
            } else {
                Sign::Zero
            };
            Univariable { sign, slope, p_value }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRule {
    pub pattern: String,
    pub category: String,
}

pub const OTHER_CATEGORY: &str = "other";

pub fn default_category_rules() -> Vec<CategoryRule> {
    [
        (r"^(hr|rr|sbp|dbp|spo2)_", "pts"),
        (r"^(age|sex|bmi)([^a-z]|$)", "demographics"),
        (r"(apache|gcs|sofa)", "score"),
        (
            r"(lactate|sodium|potassium|monocyte|troponin|creatinine|glucose|bicarbonate|wbc|hemoglobin|platelet|ph_)",
            "lab",
        ),
        (r"(temperature|heart_rate|resp)", "vitals"),
    ]
    .into_iter()
    .map(|(p, c)| CategoryRule {
        pattern: p.into(),
        category: c.into(),
    })
    .collect()
}

/// Tags each name with the category of the first matching rule.
pub fn categorize_features(names: &[String], rules: &[CategoryRule]) -> Result<Vec<String>> {
    let compiled: Vec<(Regex, &str)> = rules
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Regex::new(&r.pattern)
                .map(|re| (re, r.category.as_str()))
                .map_err(|e| Error::config(format!("ranking.rules[{i}].pattern"), e.to_string()))
        })
        .collect::<Result<_>>()?;
    Ok(names
        .iter()
        .map(|n| {
            compiled
                .iter()
                .find(|(re, _)| re.is_match(n))
                .map_or(OTHER_CATEGORY, |(_, c)| c)
                .to_string()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub category: String,
    pub relative_importance: f64,
    pub mean_min_depth: f64,
    pub sign: Sign,
    pub p_value: f64,
}

/// Importance rows sorted by relative importance, descending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub rows: Vec<ImportanceRow>,
}

impl ImportanceReport {
    pub fn build(forest: &TrainedModel, x: &DesignMatrix, y: &[u8], rules: &[CategoryRule]) -> Result<ImportanceReport> {
        if forest.feature_names != x.names() {
            return Err(Error::SchemaMismatch("forest and design matrix features differ".into()));
        }
        let depths = min_depth_importance(forest)?;
        let ri = normalize_importance(&depths);
        let uni = univariable_sign(x, y)?;
        let categories = categorize_features(x.names(), rules)?;
        let mut rows: Vec<ImportanceRow> = depths
            .into_iter()
            .zip(ri)
            .zip(uni)
            .zip(categories)
            .map(|((((feature, d), (_, r)), u), category)| ImportanceRow {
                feature,
                category,
                relative_importance: r,
                mean_min_depth: d,
                sign: u.sign,
                p_value: u.p_value,
            })
            .collect();
        rows.sort_by(|a, b| b.relative_importance.total_cmp(&a.relative_importance));
        Ok(ImportanceReport { rows })
    }

    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.rows.iter().position(|r| r.feature == feature)
    }

    pub fn write_csv(&self, path: &Path, provenance: Option<&Provenance>) -> Result<()> {
        let mut w = csv_writer(path, provenance)?;
        w.write_record(["feature", "category", "relative_importance", "sign", "p_value"])?;
        for r in &self.rows {
            w.write_record([
                r.feature.clone(),
                r.category.clone(),
                fmt_f64(r.relative_importance),
                r.sign.to_string(),
                fmt_f64(r.p_value),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
