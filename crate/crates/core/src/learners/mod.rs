//! First-level binary classifiers behind one fit/predict contract.

mod design;
pub mod forest;
pub mod gbt;
pub mod linear;
pub mod mlp;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use design::{DesignMatrix, Standardizer};
pub use forest::{ForestModel, ForestParams, Mtry};
pub use gbt::{BoostedModel, GbtParams};
pub use linear::{ElasticNetParams, LinearModel};
pub use mlp::{MlpParams, Network};

/// Probabilities are kept this far from 0 and 1.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    ElasticNet,
    RandomForest,
    Gbt,
    Mlp,
}

impl Learner {
    pub const ALL: [Learner; 4] = [Learner::Gbt, Learner::ElasticNet, Learner::RandomForest, Learner::Mlp];

    pub fn as_str(self) -> &'static str {
        match self {
            Learner::ElasticNet => "elastic_net",
            Learner::RandomForest => "random_forest",
            Learner::Gbt => "gbt",
            Learner::Mlp => "mlp",
        }
    }
}

impl std::fmt::Display for Learner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum Hyperparameters {
    ElasticNet(ElasticNetParams),
    RandomForest(ForestParams),
    Gbt(GbtParams),
    Mlp(MlpParams),
}

impl Hyperparameters {
    pub fn learner(&self) -> Learner {
        match self {
            Hyperparameters::ElasticNet(_) => Learner::ElasticNet,
            Hyperparameters::RandomForest(_) => Learner::RandomForest,
            Hyperparameters::Gbt(_) => Learner::Gbt,
            Hyperparameters::Mlp(_) => Learner::Mlp,
        }
    }

    /// Checks declared ranges; `field` prefixes error locations.
    pub fn validate(&self, field: &str) -> Result<()> {
        match self {
            Hyperparameters::ElasticNet(p) => p.validate(field),
            Hyperparameters::RandomForest(p) => p.validate(field),
            Hyperparameters::Gbt(p) => p.validate(field),
            Hyperparameters::Mlp(p) => p.validate(field),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    ElasticNet(LinearModel),
    RandomForest(ForestModel),
    Gbt(BoostedModel),
    Mlp(Network),
}

/// A fitted classifier with the metadata needed to reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub learner: Learner,
    pub hyperparameters: Hyperparameters,
    pub feature_names: Vec<String>,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub params: ModelParams,
}

impl TrainedModel {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<TrainedModel> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn forest(&self) -> Option<&ForestModel> {
        match &self.params {
            ModelParams::RandomForest(f) => Some(f),
            _ => None,
        }
    }
}

pub fn check_labels(y: &[u8], n_rows: usize) -> Result<()> {
    if y.len() != n_rows {
        return Err(Error::InvalidInput(format!(
            "{} labels for {} rows",
            y.len(),
            n_rows
        )));
    }
    if let Some(bad) = y.iter().find(|&&v| v > 1) {
        return Err(Error::InvalidInput(format!("non-binary label {bad}")));
    }
    if n_rows == 0 {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    Ok(())
}

pub fn fit(x: &DesignMatrix, y: &[u8], hp: &Hyperparameters, seed: u64) -> Result<TrainedModel> {
    match hp {
        Hyperparameters::ElasticNet(p) => linear::fit_elastic_net(x, y, p, seed),
        Hyperparameters::RandomForest(p) => forest::fit_random_forest(x, y, p, seed),
        Hyperparameters::Gbt(p) => gbt::fit_gbt(x, y, p, seed),
        Hyperparameters::Mlp(p) => mlp::fit_mlp(x, y, p, seed),
    }
}

/// Per-row probability of the positive class.
pub fn predict_proba(model: &TrainedModel, x: &DesignMatrix) -> Result<Vec<f64>> {
    if model.feature_names != x.names() {
        return Err(Error::SchemaMismatch(format!(
            "model expects {} features ({}...), matrix has {}",
            model.feature_names.len(),
            model.feature_names.first().map_or("", String::as_str),
            x.n_cols()
        )));
    }
    let raw = match &model.params {
        ModelParams::ElasticNet(m) => m.predict(x),
        ModelParams::RandomForest(m) => m.predict_positive(x),
        ModelParams::Gbt(m) => m.predict(x),
        ModelParams::Mlp(m) => m.predict(x),
    };
    raw.into_iter()
        .map(|p| {
            if p.is_finite() {
                Ok(p.clamp(PROB_EPS, 1.0 - PROB_EPS))
            } else {
                Err(Error::NonFinite(format!("{} prediction", model.learner)))
            }
        })
        .collect()
}

/// Unweighted per-row mean of member probabilities.
pub fn ensemble_average(members: &[&[f64]]) -> Result<Vec<f64>> {
    if members.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "ensemble needs at least 2 members, got {}",
            members.len()
        )));
    }
    let n = members[0].len();
    if let Some(bad) = members.iter().find(|m| m.len() != n) {
        return Err(Error::InvalidInput(format!(
            "ensemble member lengths differ: {} vs {}",
            n,
            bad.len()
        )));
    }
    let mut buf = vec![0.0; members.len()];
    Ok((0..n)
        .map(|i| {
            for (b, m) in buf.iter_mut().zip(members) {
                *b = m[i];
            }
            // sorted summation keeps the mean independent of member order
            buf.sort_by(f64::total_cmp);
            let mean = buf.iter().sum::<f64>() / buf.len() as f64;
            mean.clamp(buf[0], buf[buf.len() - 1])
        })
        .collect())
}

/// Inner-loop search space for one learner.
pub fn default_grid(learner: Learner) -> Vec<Hyperparameters> {
    match learner {
        Learner::ElasticNet => {
            let mut g = Vec::new();
            for lambda in [1e-4, 1e-3, 1e-2, 1e-1, 1.0] {
                for alpha in [0.0, 0.5, 1.0] {
                    g.push(Hyperparameters::ElasticNet(ElasticNetParams { lambda, alpha }));
                }
            }
            g
        }
        Learner::RandomForest => {
            let mut g = Vec::new();
            for mtry in [Mtry::Sqrt, Mtry::Third] {
                for min_leaf in [1, 5, 10] {
                    g.push(Hyperparameters::RandomForest(ForestParams {
                        n_trees: 300,
                        mtry,
                        min_leaf,
                        ..ForestParams::default()
                    }));
                }
            }
            g
        }
        Learner::Gbt => {
            let mut g = Vec::new();
            for n_rounds in [100, 300] {
                for max_depth in [2, 3, 4] {
                    for learning_rate in [0.05, 0.1] {
                        g.push(Hyperparameters::Gbt(GbtParams {
                            n_rounds,
                            max_depth,
                            learning_rate,
                            ..GbtParams::default()
                        }));
                    }
                }
            }
            g
        }
        Learner::Mlp => [vec![32], vec![64, 16]]
            .into_iter()
            .map(|hidden| Hyperparameters::Mlp(MlpParams { hidden, ..MlpParams::default() }))
            .collect(),
    }
}
