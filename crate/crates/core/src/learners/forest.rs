//! Random forests of Gini (classification) or squared-error (regression) trees.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{collapse, grow, Columns, Gini, GrowParams, Presorted, SquaredError, Tree};
use super::{check_labels, DesignMatrix, Hyperparameters, Learner, ModelParams, TrainedModel};
use crate::error::{Error, Result};
use crate::seed::{self, tag};

/// Features sampled per node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mtry {
    Sqrt,
    Third,
    All,
    Count(usize),
}

impl Mtry {
    pub fn resolve(self, n_features: usize) -> usize {
        let m = match self {
            Mtry::Sqrt => (n_features as f64).sqrt().floor() as usize,
            Mtry::Third => n_features / 3,
            Mtry::All => n_features,
            Mtry::Count(n) => n,
        };
        m.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub mtry: Mtry,
    pub min_leaf: usize,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 300,
            mtry: Mtry::Sqrt,
            min_leaf: 1,
            bootstrap: true,
            max_depth: None,
        }
    }
}

impl ForestParams {
    pub fn validate(&self, field: &str) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::config(format!("{field}.n_trees"), "must be >= 1"));
        }
        if self.min_leaf == 0 {
            return Err(Error::config(format!("{field}.min_leaf"), "must be >= 1"));
        }
        if self.mtry == Mtry::Count(0) {
            return Err(Error::config(format!("{field}.mtry"), "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    /// Leaf width: number of classes, or 1 for regression.
    pub n_outputs: usize,
    pub trees: Vec<Tree>,
}

impl ForestModel {
    /// Mean over trees of the leaf vectors reached by `row`.
    pub fn predict_row(&self, row: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_outputs];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(t.leaf_value(&row)) {
                *a += v;
            }
        }
        let k = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= k);
        acc
    }

    pub fn predict_positive(&self, x: &DesignMatrix) -> Vec<f64> {
        (0..x.n_rows()).map(|i| self.predict_row(|j| x.get(i, j))[1]).collect()
    }
}

enum Target<'a> {
    Classes { labels: &'a [u32], n_classes: usize },
    Values(&'a [f64]),
}

fn fit_forest(cols: &[Vec<f64>], n_rows: usize, target: Target<'_>, params: &ForestParams, seed: u64) -> ForestModel {
    let data = Columns { cols, n_rows };
    let presorted = Presorted::new(&data);
    let grow_params = GrowParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf as f64,
        mtry: Some(params.mtry.resolve(cols.len())),
    };
    let build = |t: usize| {
        let mut rng = seed::stream(seed, &[tag::TREE, t as u64]);
        let rows = if params.bootstrap {
            let draw: Vec<usize> = (0..n_rows).map(|_| rng.random_range(0..n_rows)).collect();
            collapse(&draw, n_rows)
        } else {
            (0..n_rows as u32).map(|r| (r, 1.0)).collect()
        };
        match target {
            Target::Classes { labels, n_classes } => {
                let obj = Gini { labels, n_classes };
                grow(&obj, &data, Some(&presorted), rows, grow_params, Some(&mut rng))
            }
            Target::Values(targets) => {
                let obj = SquaredError { targets };
                grow(&obj, &data, Some(&presorted), rows, grow_params, Some(&mut rng))
            }
        }
    };
    let trees: Vec<Tree> = (0..params.n_trees).into_par_iter().map(build).collect();
    let n_outputs = match target {
        Target::Classes { n_classes, .. } => n_classes,
        Target::Values(_) => 1,
    };
    ForestModel { n_outputs, trees }
}

/// Classification forest over labels `0..n_classes`.
pub fn fit_classifier(
    cols: &[Vec<f64>],
    labels: &[u32],
    n_classes: usize,
    params: &ForestParams,
    seed: u64,
) -> ForestModel {
    let target = Target::Classes { labels, n_classes };
    fit_forest(cols, labels.len(), target, params, seed)
}

pub fn fit_regressor(cols: &[Vec<f64>], targets: &[f64], params: &ForestParams, seed: u64) -> ForestModel {
    fit_forest(cols, targets.len(), Target::Values(targets), params, seed)
}

pub fn fit_random_forest(x: &DesignMatrix, y: &[u8], hp: &ForestParams, seed: u64) -> Result<TrainedModel> {
    check_labels(y, x.n_rows())?;
    hp.validate("random_forest")?;
    if let Mtry::Count(m) = hp.mtry {
        if m > x.n_cols() {
            return Err(Error::config(
                "random_forest.mtry",
                format!("{m} exceeds the {} available features", x.n_cols()),
            ));
        }
    }
    let mut warnings = Vec::new();
    if y.iter().all(|&v| v == y[0]) {
        warnings.push(format!("single-class training labels ({}); forest is constant", y[0]));
    }
    let labels: Vec<u32> = y.iter().map(|&v| u32::from(v)).collect();
    let forest = fit_classifier(x.cols(), &labels, 2, hp, seed::derive(seed, &[tag::FOREST]));
    Ok(TrainedModel {
        learner: Learner::RandomForest,
        hyperparameters: Hyperparameters::RandomForest(*hp),
        feature_names: x.names().to_vec(),
        seed,
        warnings,
        params: ModelParams::RandomForest(forest),
    })
}
