//! Fully connected network: ReLU hidden layers, sigmoid output, mean binary
//! cross-entropy, mini-batch Adam. A held-out slice of the training rows
//! picks the epoch whose weights are kept.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::linear::{sigmoid, softplus};
use super::{check_labels, DesignMatrix, Hyperparameters, Learner, ModelParams, Standardizer, TrainedModel};
use crate::error::{Error, Result};
use crate::seed::{self, tag};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub validation_fraction: f64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: vec![32],
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 32,
            validation_fraction: 0.125,
        }
    }
}

impl MlpParams {
    pub fn validate(&self, field: &str) -> Result<()> {
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config(format!("{field}.hidden"), "needs at least one layer, each of size >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config(format!("{field}.learning_rate"), "must be finite and > 0"));
        }
        if self.epochs == 0 {
            return Err(Error::config(format!("{field}.epochs"), "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config(format!("{field}.batch_size"), "must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(Error::config(format!("{field}.validation_fraction"), "must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major `n_out x n_in`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn w(&self) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape((self.n_out, self.n_in), &self.weights).expect("layer shape")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub standardizer: Standardizer,
    pub layers: Vec<Layer>,
    pub best_epoch: usize,
}

struct Trace {
    /// Pre-activations per layer.
    z: Vec<Array2<f64>>,
    /// Activations per layer, input first.
    a: Vec<Array2<f64>>,
}

impl Network {
    /// Network with every weight and bias zero.
    pub fn zeros(standardizer: Standardizer, n_in: usize, hidden: &[usize]) -> Network {
        let mut sizes = vec![n_in];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let layers = sizes
            .windows(2)
            .map(|w| Layer {
                n_in: w[0],
                n_out: w[1],
                weights: vec![0.0; w[0] * w[1]],
                bias: vec![0.0; w[1]],
            })
            .collect();
        Network {
            standardizer,
            layers,
            best_epoch: 0,
        }
    }

    fn he_init(standardizer: Standardizer, n_in: usize, hidden: &[usize], rng: &mut seed::StreamRng) -> Network {
        let mut net = Network::zeros(standardizer, n_in, hidden);
        for layer in &mut net.layers {
            let normal = Normal::new(0.0, (2.0 / layer.n_in as f64).sqrt()).expect("positive sd");
            layer.weights.iter_mut().for_each(|w| *w = normal.sample(rng));
        }
        net
    }

    fn forward(&self, x: ArrayView2<'_, f64>) -> Trace {
        let mut z = Vec::with_capacity(self.layers.len());
        let mut a = vec![x.to_owned()];
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut zl = a[l].dot(&layer.w().t());
            for mut row in zl.rows_mut() {
                row.iter_mut().zip(&layer.bias).for_each(|(v, b)| *v += b);
            }
            let al = if l < last { zl.mapv(|v| v.max(0.0)) } else { zl.clone() };
            z.push(zl);
            a.push(al);
        }
        Trace { z, a }
    }

    /// Output logits for standardized rows.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Vec<f64> {
        let trace = self.forward(x);
        trace.z.last().expect("output layer").column(0).to_vec()
    }

    pub fn predict(&self, x: &DesignMatrix) -> Vec<f64> {
        let rows = self.standardizer.transform_rows(x);
        let view = ArrayView2::from_shape((x.n_rows(), x.n_cols()), &rows).expect("row-major matrix");
        self.logits(view).into_iter().map(sigmoid).collect()
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Weights then biases, layer by layer.
    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        let mut k = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
    }

    /// Mean cross-entropy over standardized rows and its gradient in `params_flat` order.
    pub fn loss_and_gradient(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> (f64, Vec<f64>) {
        let n = y.len() as f64;
        let trace = self.forward(x);
        let out = trace.z.last().expect("output layer");
        let mut loss = 0.0;
        let mut delta = Array2::zeros((y.len(), 1));
        for (i, &yi) in y.iter().enumerate() {
            let z = out[[i, 0]];
            loss += softplus(z) - yi * z;
            delta[[i, 0]] = (sigmoid(z) - yi) / n;
        }
        loss /= n;
        let mut grads: Vec<(Vec<f64>, Vec<f64>)> = vec![(Vec::new(), Vec::new()); self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            let gw = delta.t().dot(&trace.a[l]);
            let gb = delta.sum_axis(Axis(0));
            grads[l] = (gw.iter().copied().collect(), gb.to_vec());
            if l > 0 {
                let mut back = delta.dot(&self.layers[l].w());
                back.zip_mut_with(&trace.z[l - 1], |d, &z| {
                    if z <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        let mut flat = Vec::with_capacity(self.n_params());
        for (gw, gb) in grads {
            flat.extend(gw);
            flat.extend(gb);
        }
        (loss, flat)
    }

    fn mean_loss(&self, x: ArrayView2<'_, f64>, y: &[f64]) -> f64 {
        let logits = self.logits(x);
        logits.iter().zip(y).map(|(&z, &yi)| softplus(z) - yi * z).sum::<f64>() / y.len() as f64
    }
}

fn gather(rows: &[f64], p: usize, idx: &[usize]) -> Array2<f64> {
    let mut out = Array2::zeros((idx.len(), p));
    for (k, &i) in idx.iter().enumerate() {
        out.row_mut(k)
            .iter_mut()
            .zip(&rows[i * p..(i + 1) * p])
            .for_each(|(o, &v)| *o = v);
    }
    out
}

pub fn fit_mlp(x: &DesignMatrix, y: &[u8], hp: &MlpParams, seed: u64) -> Result<TrainedModel> {
    check_labels(y, x.n_rows())?;
    hp.validate("mlp")?;
    let n = x.n_rows();
    let p = x.n_cols();
    let standardizer = Standardizer::fit(x);
    let rows = standardizer.transform_rows(x);
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();

    let mut rng = seed::stream(seed, &[tag::MLP]);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_val = ((n as f64) * hp.validation_fraction).round() as usize;
    let n_val = if n_val >= n { 0 } else { n_val };
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut train_idx = train_idx.to_vec();
    let val_x = gather(&rows, p, val_idx);
    let val_y: Vec<f64> = val_idx.iter().map(|&i| yf[i]).collect();

    let mut net = Network::he_init(standardizer, p, &hp.hidden, &mut rng);
    let mut m = vec![0.0; net.n_params()];
    let mut v = vec![0.0; net.n_params()];
    let mut theta = net.params_flat();
    let mut step = 0i32;
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for epoch in 1..=hp.epochs {
        train_idx.shuffle(&mut rng);
        for (b, batch) in train_idx.chunks(hp.batch_size).enumerate() {
            let bx = gather(&rows, p, batch);
            let by: Vec<f64> = batch.iter().map(|&i| yf[i]).collect();
            let (loss, grad) = net.loss_and_gradient(bx.view(), &by);
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "network loss {loss} at epoch {epoch}, batch {b} (learning rate {})",
                    hp.learning_rate
                )));
            }
            step += 1;
            let c1 = 1.0 - BETA1.powi(step);
            let c2 = 1.0 - BETA2.powi(step);
            for k in 0..theta.len() {
                m[k] = BETA1 * m[k] + (1.0 - BETA1) * grad[k];
                v[k] = BETA2 * v[k] + (1.0 - BETA2) * grad[k] * grad[k];
                theta[k] -= hp.learning_rate * (m[k] / c1) / ((v[k] / c2).sqrt() + ADAM_EPS);
            }
            net.set_params_flat(&theta);
        }
        if n_val > 0 {
            let loss = net.mean_loss(val_x.view(), &val_y);
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("network validation loss at epoch {epoch}")));
            }
            if best.as_ref().is_none_or(|(l, _, _)| loss < *l) {
                best = Some((loss, epoch, theta.clone()));
            }
        }
    }
    match best {
        Some((_, epoch, params)) => {
            net.set_params_flat(&params);
            net.best_epoch = epoch;
        }
        None => net.best_epoch = hp.epochs,
    }
    Ok(TrainedModel {
        learner: Learner::Mlp,
        hyperparameters: Hyperparameters::Mlp(hp.clone()),
        feature_names: x.names().to_vec(),
        seed,
        warnings: Vec::new(),
        params: ModelParams::Mlp(net),
    })
}
