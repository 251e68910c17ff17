use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::folds::make_folds;
use super::metrics::{auc, mean_ci95, sens_spec, wilcoxon_rank_sum, youden_threshold};
use crate::error::{Error, Result};
use crate::learners::{self, ensemble_average, predict_proba, DesignMatrix, Hyperparameters, Learner, TrainedModel};
use crate::provenance::{csv_writer, fmt_f64, Provenance};
use crate::seed::{self, tag};

pub const ENSEMBLE: &str = "ensemble";
pub const FIXED_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// Youden's J on outer-training scores.
    Youden,
    /// Always 0.5.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvConfig {
    pub outer_folds: usize,
    pub outer_repeats: usize,
    pub inner_folds: usize,
    pub inner_repeats: usize,
    pub stratified: bool,
    pub master_seed: u64,
    pub threshold: ThresholdRule,
    /// Evaluate only this many grid points, drawn uniformly without replacement.
    pub random_search: Option<usize>,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            outer_folds: 5,
            outer_repeats: 5,
            inner_folds: 10,
            inner_repeats: 3,
            stratified: true,
            master_seed: 0,
            threshold: ThresholdRule::Youden,
            random_search: None,
        }
    }
}

impl CvConfig {
    pub fn validate(&self, field: &str) -> Result<()> {
        for (name, v, min) in [
            ("outer_folds", self.outer_folds, 2),
            ("outer_repeats", self.outer_repeats, 1),
            ("inner_folds", self.inner_folds, 2),
            ("inner_repeats", self.inner_repeats, 1),
        ] {
            if v < min {
                return Err(Error::config(format!("{field}.{name}"), format!("must be >= {min}")));
            }
        }
        if self.random_search == Some(0) {
            return Err(Error::config(format!("{field}.random_search"), "must be >= 1"));
        }
        Ok(())
    }

    pub fn n_estimates(&self) -> usize {
        self.outer_folds * self.outer_repeats
    }
}

/// One learner and its search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub learner: Learner,
    pub grid: Vec<Hyperparameters>,
}

impl LearnerSpec {
    pub fn with_default_grid(learner: Learner) -> LearnerSpec {
        LearnerSpec {
            learner,
            grid: learners::default_grid(learner),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchResult {
    pub best_index: usize,
    pub best: Hyperparameters,
    /// Inner mean AUC per grid point; `None` when every inner fit failed.
    pub mean_auc: Vec<Option<f64>>,
}

fn learner_key(l: Learner) -> u64 {
    match l {
        Learner::ElasticNet => 0,
        Learner::RandomForest => 1,
        Learner::Gbt => 2,
        Learner::Mlp => 3,
    }
}

/// Grid indices to evaluate, ascending. All of them unless `random_search` is set.
pub fn search_points(n_grid: usize, random_search: Option<usize>, seed: u64) -> Vec<usize> {
    match random_search {
        Some(k) if k < n_grid => {
            let mut rng = seed::stream(seed, &[tag::SEARCH, u64::MAX]);
            let mut picked = rand::seq::index::sample(&mut rng, n_grid, k).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..n_grid).collect(),
    }
}

/// Picks the grid point with the best inner-loop mean AUC (first on ties).
pub fn grid_search(
    grid: &[Hyperparameters],
    x: &DesignMatrix,
    y: &[u8],
    cv: &CvConfig,
    seed: u64,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty hyperparameter grid".into()));
    }
    let points = search_points(grid.len(), cv.random_search, seed);
    if points.len() == 1 {
        let g = points[0];
        let mean_auc = vec![None; grid.len()];
        return Ok(GridSearchResult {
            best_index: g,
            best: grid[g].clone(),
            mean_auc,
        });
    }
    let folds = make_folds(y, cv.inner_folds, cv.inner_repeats, cv.stratified, seed::derive(seed, &[tag::INNER]))?;
    let splits: Vec<(usize, usize)> = (0..cv.inner_repeats)
        .flat_map(|r| (0..cv.inner_folds).map(move |f| (r, f)))
        .collect();
    let jobs: Vec<(usize, usize, usize)> = points
        .iter()
        .flat_map(|&g| splits.iter().map(move |&(r, f)| (g, r, f)))
        .collect();
    let scores: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(g, r, f)| {
            let (train, test) = folds.split(r, f);
            let xt = x.select_rows(&train);
            let yt: Vec<u8> = train.iter().map(|&i| y[i]).collect();
            // shared across grid points, so points differ only by their hyperparameters
            let key = seed::derive(seed, &[tag::SEARCH, r as u64, f as u64]);
            let model = learners::fit(&xt, &yt, &grid[g], key).ok()?;
            let p = predict_proba(&model, &x.select_rows(&test)).ok()?;
            let yv: Vec<u8> = test.iter().map(|&i| y[i]).collect();
            auc(&p, &yv).ok()
        })
        .collect();
    let per_point = splits.len();
    let mut mean_auc: Vec<Option<f64>> = vec![None; grid.len()];
    for (&g, c) in points.iter().zip(scores.chunks(per_point)) {
        let ok: Vec<f64> = c.iter().flatten().copied().collect();
        mean_auc[g] = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64);
    }
    let mut best: Option<(usize, f64)> = None;
    for (g, m) in mean_auc.iter().enumerate() {
        if let Some(m) = *m {
            if best.is_none_or(|(_, b)| m > b) {
                best = Some((g, m));
            }
        }
    }
    let (best_index, _) = best.ok_or_else(|| Error::InvalidInput("every grid point failed on every inner fold".into()))?;
    Ok(GridSearchResult {
        best_index,
        best: grid[best_index].clone(),
        mean_auc,
    })
}

/// Everything fitted for one learner on one outer-training split.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterFit {
    pub search: GridSearchResult,
    pub model: TrainedModel,
    pub train_scores: Vec<f64>,
}

/// Tunes and refits one learner using only the rows in `train`.
pub fn fit_outer(
    x: &DesignMatrix,
    y: &[u8],
    train: &[usize],
    spec: &LearnerSpec,
    cv: &CvConfig,
    repeat: usize,
    fold: usize,
) -> Result<OuterFit> {
    let xt = x.select_rows(train);
    let yt: Vec<u8> = train.iter().map(|&i| y[i]).collect();
    let key = seed::derive(cv.master_seed, &[tag::OUTER, repeat as u64, fold as u64, learner_key(spec.learner)]);
    let search = grid_search(&spec.grid, &xt, &yt, cv, key)?;
    let model = learners::fit(&xt, &yt, &search.best, key)?;
    let train_scores = predict_proba(&model, &xt)?;
    Ok(OuterFit {
        search,
        model,
        train_scores,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldEstimate {
    pub repeat: usize,
    pub fold: usize,
    pub auc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub threshold: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hyperparameters: Option<Hyperparameters>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldFailure {
    pub repeat: usize,
    pub fold: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub model: String,
    pub n_estimates: usize,
    pub mean_auc: Option<f64>,
    pub ci95_low: Option<f64>,
    pub ci95_high: Option<f64>,
    pub mean_sensitivity: Option<f64>,
    pub mean_specificity: Option<f64>,
    pub estimates: Vec<FoldEstimate>,
    pub failures: Vec<FoldFailure>,
}

impl ModelReport {
    fn new(model: String, estimates: Vec<FoldEstimate>, failures: Vec<FoldFailure>) -> ModelReport {
        let aucs: Vec<f64> = estimates.iter().map(|e| e.auc).collect();
        let mean = |f: fn(&FoldEstimate) -> f64| {
            (!estimates.is_empty()).then(|| estimates.iter().map(f).sum::<f64>() / estimates.len() as f64)
        };
        let (m, lo, hi) = mean_ci95(&aucs);
        let some = |v: f64| (!aucs.is_empty()).then_some(v);
        ModelReport {
            n_estimates: estimates.len(),
            mean_auc: some(m),
            ci95_low: some(lo),
            ci95_high: some(hi),
            mean_sensitivity: mean(|e| e.sensitivity),
            mean_specificity: mean(|e| e.specificity),
            model,
            estimates,
            failures,
        }
    }

    pub fn aucs(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.auc).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub model_a: String,
    pub model_b: String,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub master_seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_fingerprint: Option<String>,
    pub cv: CvConfig,
    pub n_patients: usize,
    pub n_features: usize,
    pub models: Vec<ModelReport>,
    pub comparisons: Vec<Comparison>,
}

impl EvalReport {
    pub fn model(&self, name: &str) -> Option<&ModelReport> {
        self.models.iter().find(|m| m.model == name)
    }

    /// One row per outer estimate: model, repeat, fold, auc, sensitivity, specificity, threshold.
    pub fn write_fold_csv(&self, path: &Path, provenance: Option<&Provenance>) -> Result<()> {
        let mut w = csv_writer(path, provenance)?;
        w.write_record(["model", "repeat", "fold", "auc", "sensitivity", "specificity", "threshold"])?;
        for m in &self.models {
            for e in &m.estimates {
                w.write_record([
                    m.model.clone(),
                    e.repeat.to_string(),
                    e.fold.to_string(),
                    fmt_f64(e.auc),
                    fmt_f64(e.sensitivity),
                    fmt_f64(e.specificity),
                    fmt_f64(e.threshold),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Held-out probabilities of every model on one outer fold.
#[derive(Debug, Clone, PartialEq)]
pub struct HeldOut {
    pub repeat: usize,
    pub fold: usize,
    pub rows: Vec<usize>,
    /// (model name, probabilities) for models that succeeded on this fold.
    pub predictions: Vec<(String, Vec<f64>)>,
}

struct Scored {
    train_scores: Vec<f64>,
    test_scores: Vec<f64>,
    hyperparameters: Option<Hyperparameters>,
}

fn estimate(
    s: &Scored,
    y_train: &[u8],
    y_test: &[u8],
    rule: ThresholdRule,
    repeat: usize,
    fold: usize,
) -> Result<FoldEstimate> {
    let threshold = match rule {
        ThresholdRule::Youden => youden_threshold(&s.train_scores, y_train)?,
        ThresholdRule::Fixed => FIXED_THRESHOLD,
    };
    let (sensitivity, specificity) = sens_spec(&s.test_scores, y_test, threshold)?;
    Ok(FoldEstimate {
        repeat,
        fold,
        auc: auc(&s.test_scores, y_test)?,
        sensitivity,
        specificity,
        threshold,
        hyperparameters: s.hyperparameters.clone(),
    })
}

pub fn nested_cv(x: &DesignMatrix, y: &[u8], specs: &[LearnerSpec], cv: &CvConfig) -> Result<EvalReport> {
    nested_cv_detailed(x, y, specs, cv).map(|(r, _)| r)
}

/// Nested cross-validation: per outer split, tune on the training part,
/// refit, and score the held-out part. Also returns held-out predictions.
pub fn nested_cv_detailed(
    x: &DesignMatrix,
    y: &[u8],
    specs: &[LearnerSpec],
    cv: &CvConfig,
) -> Result<(EvalReport, Vec<HeldOut>)> {
    cv.validate("evaluation")?;
    if specs.is_empty() {
        return Err(Error::InvalidInput("no learners to evaluate".into()));
    }
    learners::check_labels(y, x.n_rows())?;
    if y.iter().all(|&v| v == y[0]) {
        return Err(Error::UndefinedMetric("labels contain a single class".into()));
    }
    let outer = make_folds(
        y,
        cv.outer_folds,
        cv.outer_repeats,
        cv.stratified,
        seed::derive(cv.master_seed, &[tag::OUTER]),
    )?;
    let jobs: Vec<(usize, usize)> = (0..cv.outer_repeats)
        .flat_map(|r| (0..cv.outer_folds).map(move |f| (r, f)))
        .collect();
    let results: Vec<Vec<Result<Scored>>> = jobs
        .par_iter()
        .map(|&(r, f)| {
            let (train, test) = outer.split(r, f);
            let x_test = x.select_rows(&test);
            specs
                .iter()
                .map(|spec| {
                    let fit = fit_outer(x, y, &train, spec, cv, r, f)?;
                    let test_scores = predict_proba(&fit.model, &x_test)?;
                    Ok(Scored {
                        train_scores: fit.train_scores,
                        test_scores,
                        hyperparameters: Some(fit.search.best),
                    })
                })
                .collect()
        })
        .collect();

    let mut names: Vec<String> = specs.iter().map(|s| s.learner.to_string()).collect();
    let with_ensemble = specs.len() >= 2;
    if with_ensemble {
        names.push(ENSEMBLE.to_string());
    }
    let mut estimates: Vec<Vec<FoldEstimate>> = vec![Vec::new(); names.len()];
    let mut failures: Vec<Vec<FoldFailure>> = vec![Vec::new(); names.len()];
    let mut held_out = Vec::with_capacity(jobs.len());
    for (&(r, f), fold_results) in jobs.iter().zip(results) {
        let (train, test) = outer.split(r, f);
        let y_train: Vec<u8> = train.iter().map(|&i| y[i]).collect();
        let y_test: Vec<u8> = test.iter().map(|&i| y[i]).collect();
        let mut predictions = Vec::new();
        let mut members: Vec<Scored> = Vec::new();
        for (m, res) in fold_results.into_iter().enumerate() {
            let outcome = res.and_then(|s| estimate(&s, &y_train, &y_test, cv.threshold, r, f).map(|e| (s, e)));
            match outcome {
                Ok((s, e)) => {
                    estimates[m].push(e);
                    predictions.push((names[m].clone(), s.test_scores.clone()));
                    members.push(s);
                }
                Err(err) => failures[m].push(FoldFailure {
                    repeat: r,
                    fold: f,
                    error: err.to_string(),
                }),
            }
        }
        if with_ensemble {
            let e = names.len() - 1;
            if members.len() == specs.len() {
                let train: Vec<&[f64]> = members.iter().map(|s| s.train_scores.as_slice()).collect();
                let test: Vec<&[f64]> = members.iter().map(|s| s.test_scores.as_slice()).collect();
                let scored = ensemble_average(&train).and_then(|train_scores| {
                    Ok(Scored {
                        train_scores,
                        test_scores: ensemble_average(&test)?,
                        hyperparameters: None,
                    })
                });
                match scored.and_then(|s| estimate(&s, &y_train, &y_test, cv.threshold, r, f).map(|e| (s, e))) {
                    Ok((s, est)) => {
                        estimates[e].push(est);
                        predictions.push((ENSEMBLE.to_string(), s.test_scores));
                    }
                    Err(err) => failures[e].push(FoldFailure {
                        repeat: r,
                        fold: f,
                        error: err.to_string(),
                    }),
                }
            } else {
                failures[e].push(FoldFailure {
                    repeat: r,
                    fold: f,
                    error: "a member learner failed on this fold".into(),
                });
            }
        }
        held_out.push(HeldOut {
            repeat: r,
            fold: f,
            rows: test,
            predictions,
        });
    }
    let models: Vec<ModelReport> = names
        .into_iter()
        .zip(estimates)
        .zip(failures)
        .map(|((n, e), f)| ModelReport::new(n, e, f))
        .collect();
    let mut comparisons = Vec::new();
    for i in 0..models.len() {
        for j in i + 1..models.len() {
            let (a, b) = (models[i].aucs(), models[j].aucs());
            if a.is_empty() || b.is_empty() {
                continue;
            }
            comparisons.push(Comparison {
                model_a: models[i].model.clone(),
                model_b: models[j].model.clone(),
                p_value: wilcoxon_rank_sum(&a, &b)?,
            });
        }
    }
    Ok((
        EvalReport {
            master_seed: cv.master_seed,
            config_fingerprint: None,
            cv: cv.clone(),
            n_patients: x.n_rows(),
            n_features: x.n_cols(),
            models,
            comparisons,
        },
        held_out,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn search_points_subset() {
        assert_eq!(search_points(4, None, 1), vec![0, 1, 2, 3]);
        assert_eq!(search_points(4, Some(9), 1), vec![0, 1, 2, 3]);
        let a = search_points(20, Some(5), 7);
        assert_eq!(a.len(), 5);
        assert!(a.windows(2).all(|w| w[0] < w[1]) && a[4] < 20);
        assert_eq!(a, search_points(20, Some(5), 7));
    }
}
