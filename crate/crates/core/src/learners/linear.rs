//! Elastic-net penalized logistic regression.
//!
//! Objective on standardized columns with an unpenalized intercept:
//! mean logistic loss + lambda * (alpha * |b|_1 + (1 - alpha) / 2 * |b|_2^2),
//! minimized by proximal Newton steps (IRLS) whose quadratic subproblems are
//! solved by cyclic coordinate descent.

use serde::{Deserialize, Serialize};

use super::{check_labels, DesignMatrix, Hyperparameters, ModelParams, Standardizer, TrainedModel};
use crate::error::{Error, Result};

pub const CONVERGENCE_TOL: f64 = 1e-7;
const INNER_TOL: f64 = 1e-12;
const MAX_OUTER: usize = 500;
const MAX_SWEEPS: usize = 100_000;
const MIN_WEIGHT: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticNetParams {
    pub lambda: f64,
    pub alpha: f64,
}

impl Default for ElasticNetParams {
    fn default() -> Self {
        ElasticNetParams { lambda: 1e-2, alpha: 0.5 }
    }
}

impl ElasticNetParams {
    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::config(format!("{field}.lambda"), "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::config(format!("{field}.alpha"), "must lie in [0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub standardizer: Standardizer,
    /// Intercept on the standardized scale.
    pub intercept: f64,
    /// Slopes on the standardized scale.
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl LinearModel {
    pub fn linear_predictor(&self, x: &DesignMatrix) -> Vec<f64> {
        let mut eta = vec![self.intercept; x.n_rows()];
        for (j, &b) in self.coefficients.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            for (e, &v) in eta.iter_mut().zip(x.col(j)) {
                *e += b * self.standardizer.apply(j, v);
            }
        }
        eta
    }

    pub fn predict(&self, x: &DesignMatrix) -> Vec<f64> {
        self.linear_predictor(x).into_iter().map(sigmoid).collect()
    }

    /// Slopes and intercept on the original feature scale.
    pub fn original_scale(&self) -> (f64, Vec<f64>) {
        let mut intercept = self.intercept;
        let slopes = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(j, &b)| {
                let sd = self.standardizer.sd[j];
                if sd > 0.0 {
                    intercept -= b * self.standardizer.mean[j] / sd;
                    b / sd
                } else {
                    0.0
                }
            })
            .collect();
        (intercept, slopes)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^z) without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

pub(crate) fn logit_of_mean(y: &[f64]) -> f64 {
    let m = (y.iter().sum::<f64>() / y.len() as f64).clamp(1e-6, 1.0 - 1e-6);
    (m / (1.0 - m)).ln()
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

pub(crate) struct Solution {
    pub intercept: f64,
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Problem<'a> {
    /// Standardized columns; `None` for constant columns.
    cols: Vec<Option<&'a [f64]>>,
    y: &'a [f64],
    l1: f64,
    l2: f64,
}

impl Problem<'_> {
    fn eta(&self, b0: f64, beta: &[f64]) -> Vec<f64> {
        let mut eta = vec![b0; self.y.len()];
        for (col, &b) in self.cols.iter().zip(beta) {
            let Some(c) = col else { continue };
            if b != 0.0 {
                for (e, &v) in eta.iter_mut().zip(c.iter()) {
                    *e += b * v;
                }
            }
        }
        eta
    }

    fn objective(&self, b0: f64, beta: &[f64]) -> f64 {
        let eta = self.eta(b0, beta);
        let n = self.y.len() as f64;
        let loss: f64 = eta.iter().zip(self.y).map(|(&e, &y)| softplus(e) - y * e).sum::<f64>() / n;
        let pen: f64 = beta.iter().map(|b| self.l1 * b.abs() + 0.5 * self.l2 * b * b).sum();
        loss + pen
    }

    /// Coordinate descent on the weighted least-squares subproblem around `eta`.
    fn quadratic_step(&self, b0: f64, beta: &[f64], eta: &[f64]) -> (f64, Vec<f64>) {
        let n = self.y.len() as f64;
        let mut w = Vec::with_capacity(eta.len());
        let mut r = Vec::with_capacity(eta.len());
        for (&e, &y) in eta.iter().zip(self.y) {
            let p = sigmoid(e);
            let wi = (p * (1.0 - p)).max(MIN_WEIGHT);
            w.push(wi);
            r.push((y - p) / wi);
        }
        let sum_w: f64 = w.iter().sum();
        let curv: Vec<f64> = self
            .cols
            .iter()
            .map(|c| c.map_or(0.0, |c| c.iter().zip(&w).map(|(x, w)| w * x * x).sum::<f64>() / n))
            .collect();
        let mut b0 = b0;
        let mut beta = beta.to_vec();
        let mut active_only = false;
        for _ in 0..MAX_SWEEPS {
            let mut max_delta: f64 = 0.0;
            let d0 = r.iter().zip(&w).map(|(r, w)| r * w).sum::<f64>() / sum_w;
            if d0 != 0.0 {
                b0 += d0;
                r.iter_mut().for_each(|ri| *ri -= d0);
                max_delta = d0.abs();
            }
            for (j, col) in self.cols.iter().enumerate() {
                let Some(col) = col else { continue };
                if active_only && beta[j] == 0.0 {
                    continue;
                }
                let g = col.iter().zip(&w).zip(&r).map(|((x, w), r)| x * w * r).sum::<f64>() / n;
                let new = soft_threshold(g + curv[j] * beta[j], self.l1) / (curv[j] + self.l2);
                let d = new - beta[j];
                if d != 0.0 {
                    for (ri, &x) in r.iter_mut().zip(col.iter()) {
                        *ri -= d * x;
                    }
                    beta[j] = new;
                    max_delta = max_delta.max(d.abs());
                }
            }
            if max_delta < INNER_TOL {
                if !active_only {
                    break;
                }
                active_only = false;
            } else {
                active_only = true;
            }
        }
        (b0, beta)
    }

    fn solve(&self) -> Solution {
        let p = self.cols.len();
        let mut b0 = logit_of_mean(self.y);
        let mut beta = vec![0.0; p];
        let mut f = self.objective(b0, &beta);
        for it in 1..=MAX_OUTER {
            let eta = self.eta(b0, &beta);
            let (mut nb0, mut nbeta) = self.quadratic_step(b0, &beta, &eta);
            let mut nf = self.objective(nb0, &nbeta);
            // backtrack toward the previous iterate if the full step increases the objective
            let mut halvings = 0;
            while nf > f + 1e-15 * f.abs() && halvings < 40 {
                nb0 = 0.5 * (nb0 + b0);
                nbeta.iter_mut().zip(&beta).for_each(|(n, o)| *n = 0.5 * (*n + o));
                nf = self.objective(nb0, &nbeta);
                halvings += 1;
            }
            let change = nbeta
                .iter()
                .zip(&beta)
                .map(|(a, b)| (a - b).abs())
                .fold((nb0 - b0).abs(), f64::max);
            b0 = nb0;
            beta = nbeta;
            f = nf;
            if change < CONVERGENCE_TOL {
                return Solution {
                    intercept: b0,
                    beta,
                    iterations: it,
                    converged: true,
                };
            }
        }
        Solution {
            intercept: b0,
            beta,
            iterations: MAX_OUTER,
            converged: false,
        }
    }
}

/// Solves the penalized problem on already-standardized columns.
pub(crate) fn solve_standardized(cols: &[Option<Vec<f64>>], y: &[f64], lambda: f64, alpha: f64) -> Solution {
    let problem = Problem {
        cols: cols.iter().map(|c| c.as_deref()).collect(),
        y,
        l1: lambda * alpha,
        l2: lambda * (1.0 - alpha),
    };
    problem.solve()
}

pub fn fit_elastic_net(x: &DesignMatrix, y: &[u8], hp: &ElasticNetParams, seed: u64) -> Result<TrainedModel> {
    check_labels(y, x.n_rows())?;
    hp.validate("elastic_net")?;
    let standardizer = Standardizer::fit(x);
    let cols: Vec<Option<Vec<f64>>> = (0..x.n_cols())
        .map(|j| (standardizer.sd[j] > 0.0).then(|| standardizer.transform_col(j, x.col(j))))
        .collect();
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let sol = solve_standardized(&cols, &yf, hp.lambda, hp.alpha);
    let mut warnings = Vec::new();
    if !sol.converged {
        warnings.push(format!("elastic net did not converge in {} iterations", sol.iterations));
    }
    Ok(TrainedModel {
        learner: super::Learner::ElasticNet,
        hyperparameters: Hyperparameters::ElasticNet(*hp),
        feature_names: x.names().to_vec(),
        seed,
        warnings,
        params: ModelParams::ElasticNet(LinearModel {
            standardizer,
            intercept: sol.intercept,
            coefficients: sol.beta,
            iterations: sol.iterations,
            converged: sol.converged,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    fn toy(n: usize, seed_: u64) -> (DesignMatrix, Vec<u8>) {
        let mut rng = seed::stream(seed_, &[]);
        let mut cols = vec![Vec::new(), Vec::new(), Vec::new()];
        let mut y = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            let c: f64 = rng.random_range(0.0..10.0);
            let p = sigmoid(1.5 * a - 0.5 * b + 0.1);
            y.push(u8::from(rng.random::<f64>() < p));
            cols[0].push(a);
            cols[1].push(b);
            cols[2].push(c);
        }
        (DesignMatrix::new(vec!["a".into(), "b".into(), "c".into()], cols).unwrap(), y)
    }

    fn linear(m: &TrainedModel) -> &LinearModel {
        match &m.params {
            ModelParams::ElasticNet(l) => l,
            _ => unreachable!(),
        }
    }

    #[test]
    fn full_shrinkage_gives_base_rate() {
        let (x, y) = toy(80, 1);
        let m = fit_elastic_net(&x, &y, &ElasticNetParams { lambda: 1e6, alpha: 0.5 }, 0).unwrap();
        let l = linear(&m);
        assert!(l.coefficients.iter().all(|&b| b == 0.0));
        let mean = y.iter().map(|&v| f64::from(v)).sum::<f64>() / y.len() as f64;
        assert!((l.intercept - (mean / (1.0 - mean)).ln()).abs() < 1e-9);
        let p = l.predict(&x);
        assert!(p.iter().all(|&v| v == p[0]));
    }

    #[test]
    fn constant_column_gets_zero_slope() {
        let (x, y) = toy(60, 2);
        let mut cols = x.cols().to_vec();
        cols.push(vec![3.0; 60]);
        let names = vec!["a".into(), "b".into(), "c".into(), "k".into()];
        let x = DesignMatrix::new(names, cols).unwrap();
        let m = fit_elastic_net(&x, &y, &ElasticNetParams { lambda: 1e-3, alpha: 0.5 }, 0).unwrap();
        assert_eq!(linear(&m).coefficients[3], 0.0);
        assert!(linear(&m).converged);
    }

    #[test]
    fn rejects_non_binary_labels() {
        let (x, mut y) = toy(10, 3);
        y[0] = 2;
        assert!(fit_elastic_net(&x, &y, &ElasticNetParams::default(), 0).is_err());
    }
}
