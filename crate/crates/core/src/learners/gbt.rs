//! Newton boosting of depth-limited trees on the logistic loss.

use serde::{Deserialize, Serialize};

use super::linear::{logit_of_mean, sigmoid};
use super::tree::{grow, Columns, GrowParams, Newton, Node, Presorted, Tree};
use super::{check_labels, DesignMatrix, Hyperparameters, Learner, ModelParams, TrainedModel};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub l2_leaf_lambda: f64,
    pub min_leaf: usize,
}

impl Default for GbtParams {
    fn default() -> Self {
        GbtParams {
            n_rounds: 100,
            max_depth: 3,
            learning_rate: 0.1,
            l2_leaf_lambda: 1.0,
            min_leaf: 1,
        }
    }
}

impl GbtParams {
    pub fn validate(&self, field: &str) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(Error::config(format!("{field}.n_rounds"), "must be >= 1"));
        }
        if self.max_depth == 0 {
            return Err(Error::config(format!("{field}.max_depth"), "must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::config(format!("{field}.learning_rate"), "must lie in (0, 1]"));
        }
        if !(self.l2_leaf_lambda >= 0.0 && self.l2_leaf_lambda.is_finite()) {
            return Err(Error::config(format!("{field}.l2_leaf_lambda"), "must be finite and >= 0"));
        }
        if self.min_leaf == 0 {
            return Err(Error::config(format!("{field}.min_leaf"), "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostedModel {
    pub base_score: f64,
    /// Leaf values already scaled by the learning rate.
    pub trees: Vec<Tree>,
}

impl BoostedModel {
    pub fn score_row(&self, row: impl Fn(usize) -> f64) -> f64 {
        self.trees.iter().fold(self.base_score, |s, t| s + t.leaf_value(&row)[0])
    }

    pub fn predict(&self, x: &DesignMatrix) -> Vec<f64> {
        (0..x.n_rows())
            .map(|i| sigmoid(self.score_row(|j| x.get(i, j))))
            .collect()
    }
}

pub fn fit_gbt(x: &DesignMatrix, y: &[u8], hp: &GbtParams, seed: u64) -> Result<TrainedModel> {
    check_labels(y, x.n_rows())?;
    hp.validate("gbt")?;
    let n = x.n_rows();
    let yf: Vec<f64> = y.iter().map(|&v| f64::from(v)).collect();
    let base_score = logit_of_mean(&yf);
    let data = Columns { cols: x.cols(), n_rows: n };
    let presorted = Presorted::new(&data);
    let params = GrowParams {
        max_depth: Some(hp.max_depth),
        min_leaf: hp.min_leaf as f64,
        mtry: None,
    };
    let mut score = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];
    let mut trees = Vec::with_capacity(hp.n_rounds);
    let rows: Vec<(u32, f64)> = (0..n as u32).map(|r| (r, 1.0)).collect();
    for _ in 0..hp.n_rounds {
        for i in 0..n {
            let p = sigmoid(score[i]);
            grad[i] = p - yf[i];
            hess[i] = p * (1.0 - p);
        }
        let obj = Newton {
            grad: &grad,
            hess: &hess,
            lambda: hp.l2_leaf_lambda,
        };
        let mut tree = grow(&obj, &data, Some(&presorted), rows.clone(), params, None);
        for node in &mut tree.nodes {
            if let Node::Leaf { value } = node {
                value[0] *= hp.learning_rate;
            }
        }
        for (i, s) in score.iter_mut().enumerate() {
            *s += tree.leaf_value(|j| x.get(i, j))[0];
        }
        if score.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("boosting score".into()));
        }
        trees.push(tree);
    }
    Ok(TrainedModel {
        learner: Learner::Gbt,
        hyperparameters: Hyperparameters::Gbt(*hp),
        feature_names: x.names().to_vec(),
        seed,
        warnings: Vec::new(),
        params: ModelParams::Gbt(BoostedModel { base_score, trees }),
    })
}
