//! Discrimination metrics, fold construction, grid search and nested
//! cross-validation.

mod cv;
mod folds;
mod metrics;

pub use cv::{
    fit_outer, grid_search, nested_cv, nested_cv_detailed, Comparison, CvConfig, EvalReport, FoldEstimate,
    FoldFailure, GridSearchResult, HeldOut, LearnerSpec, ModelReport, OuterFit, ThresholdRule, ENSEMBLE,
    FIXED_THRESHOLD,
};
pub use folds::{make_folds, FoldAssignment};
pub use metrics::{auc, mean_ci95, sens_spec, wilcoxon_rank_sum, youden_threshold, EXACT_MAX_N};
