use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complete numeric design matrix, stored column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    names: Vec<String>,
    cols: Vec<Vec<f64>>,
    n_rows: usize,
}

impl DesignMatrix {
    pub fn new(names: Vec<String>, cols: Vec<Vec<f64>>) -> Result<DesignMatrix> {
        if names.len() != cols.len() {
            return Err(Error::InvalidInput(format!(
                "{} names for {} columns",
                names.len(),
                cols.len()
            )));
        }
        let n_rows = cols.first().map_or(0, Vec::len);
        for (name, col) in names.iter().zip(&cols) {
            if col.len() != n_rows {
                return Err(Error::InvalidInput(format!(
                    "column `{name}` has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("column `{name}`")));
            }
        }
        Ok(DesignMatrix { names, cols, n_rows })
    }

    pub fn from_rows(names: Vec<String>, rows: &[Vec<f64>]) -> Result<DesignMatrix> {
        let p = names.len();
        if let Some(r) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::InvalidInput(format!("row of length {} for {p} columns", r.len())));
        }
        let cols = (0..p).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        let mut m = DesignMatrix::new(names, cols)?;
        m.n_rows = rows.len();
        Ok(m)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn cols(&self) -> &[Vec<f64>] {
        &self.cols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.cols[j]
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.cols[col][row]
    }

    pub fn row(&self, row: usize) -> Vec<f64> {
        self.cols.iter().map(|c| c[row]).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn select_rows(&self, rows: &[usize]) -> DesignMatrix {
        DesignMatrix {
            names: self.names.clone(),
            cols: self.cols.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect(),
            n_rows: rows.len(),
        }
    }

    pub fn select_cols(&self, cols: &[usize]) -> DesignMatrix {
        DesignMatrix {
            names: cols.iter().map(|&j| self.names[j].clone()).collect(),
            cols: cols.iter().map(|&j| self.cols[j].clone()).collect(),
            n_rows: self.n_rows,
        }
    }

    /// Replaces one column in place, keeping its name.
    pub fn map_col(&mut self, j: usize, f: impl Fn(f64) -> f64) -> Result<()> {
        for v in &mut self.cols[j] {
            *v = f(*v);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("column `{}`", self.names[j])));
            }
        }
        Ok(())
    }
}

/// Per-column mean and population sd fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    /// Zero marks a constant column, which standardizes to 0.
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &DesignMatrix) -> Standardizer {
        let n = x.n_rows() as f64;
        let mut mean = Vec::with_capacity(x.n_cols());
        let mut sd = Vec::with_capacity(x.n_cols());
        for col in x.cols() {
            if col.iter().all(|&v| v == col[0]) {
                mean.push(col.first().copied().unwrap_or(0.0));
                sd.push(0.0);
                continue;
            }
            let m = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
            mean.push(m);
            sd.push(var.sqrt());
        }
        Standardizer { mean, sd }
    }

    pub fn apply(&self, j: usize, v: f64) -> f64 {
        if self.sd[j] > 0.0 {
            (v - self.mean[j]) / self.sd[j]
        } else {
            0.0
        }
    }

    pub fn transform_col(&self, j: usize, col: &[f64]) -> Vec<f64> {
        col.iter().map(|&v| self.apply(j, v)).collect()
    }

    /// Row-major standardized copy of `x`.
    pub fn transform_rows(&self, x: &DesignMatrix) -> Vec<f64> {
        let p = x.n_cols();
        let mut out = vec![0.0; x.n_rows() * p];
        for (j, col) in x.cols().iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                out[i * p + j] = self.apply(j, v);
            }
        }
        out
    }
}
