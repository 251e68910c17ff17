//! Pipeline configuration: one JSON document, validated up front.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cohort::{Outcome, SynthConfig};
use crate::ehr::{DEFAULT_DROP_THRESHOLD, DEFAULT_ITERATIONS};
use crate::error::{Error, Result};
use crate::features::Catalog;
use crate::eval::{CvConfig, LearnerSpec, ThresholdRule};
use crate::learners::{default_grid, Hyperparameters, Learner};
use crate::pts::{BoundsTable, PreprocessParams};
use crate::ranking::{categorize_features, default_category_rules, CategoryRule};

pub const WORKERS_ENV: &str = "PROGNOSIS_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CohortSource {
    Synthetic(SynthConfig),
    /// Directory holding patients.csv, vitals.csv, chart.csv and ehr.csv.
    Files { directory: PathBuf },
}

impl Default for CohortSource {
    fn default() -> Self {
        CohortSource::Synthetic(SynthConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub source: CohortSource,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub bounds: BoundsTable,
    pub window_len: Option<usize>,
    pub k: Option<f64>,
}

impl PreprocessConfig {
    pub fn params(&self) -> PreprocessParams {
        let d = PreprocessParams::default();
        PreprocessParams {
            window_len: self.window_len.unwrap_or(d.window_len),
            k: self.k.unwrap_or(d.k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    /// `"default"` or a path to a catalog JSON file.
    pub catalog: String,
    /// Windows for the default catalog as `[label, [start, end]]` slot ranges.
    pub windows: Option<Vec<(String, (usize, usize))>>,
}

impl FeaturesConfig {
    pub fn load_catalog(&self) -> Result<Catalog> {
        if self.catalog == "default" {
            match &self.windows {
                Some(w) => Catalog::with_windows(w),
                None => Ok(Catalog::default_catalog()),
            }
        } else {
            Catalog::read(Path::new(&self.catalog))
        }
    }
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig {
            catalog: "default".into(),
            windows: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EhrConfig {
    pub drop_threshold: f64,
    pub impute_iterations: usize,
    pub categorical: Vec<String>,
}

impl Default for EhrConfig {
    fn default() -> Self {
        EhrConfig {
            drop_threshold: DEFAULT_DROP_THRESHOLD,
            impute_iterations: DEFAULT_ITERATIONS,
            categorical: vec!["sex".into()],
        }
    }
}

/// Which columns enter the design matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    #[default]
    Combined,
    Ehr,
    Pts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelsConfig {
    pub enabled: Vec<Learner>,
    /// Per-learner grids; learners without an entry use the default grid.
    pub grids: BTreeMap<Learner, Vec<Hyperparameters>>,
    pub feature_set: FeatureSet,
}

impl Default for ModelsConfig {
    fn default() -> Self {
        ModelsConfig {
            enabled: Learner::ALL.to_vec(),
            grids: BTreeMap::new(),
            feature_set: FeatureSet::Combined,
        }
    }
}

impl ModelsConfig {
    pub fn specs(&self) -> Vec<LearnerSpec> {
        self.enabled
            .iter()
            .map(|&learner| LearnerSpec {
                learner,
                grid: self.grids.get(&learner).cloned().unwrap_or_else(|| default_grid(learner)),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub outer_folds: usize,
    pub outer_repeats: usize,
    pub inner_folds: usize,
    pub inner_repeats: usize,
    pub stratified: bool,
    pub threshold: ThresholdRule,
    pub random_search: Option<usize>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        let d = CvConfig::default();
        EvaluationConfig {
            outer_folds: d.outer_folds,
            outer_repeats: d.outer_repeats,
            inner_folds: d.inner_folds,
            inner_repeats: d.inner_repeats,
            stratified: d.stratified,
            threshold: d.threshold,
            random_search: d.random_search,
        }
    }
}

impl EvaluationConfig {
    pub fn cv(&self, master_seed: u64) -> CvConfig {
        CvConfig {
            outer_folds: self.outer_folds,
            outer_repeats: self.outer_repeats,
            inner_folds: self.inner_folds,
            inner_repeats: self.inner_repeats,
            stratified: self.stratified,
            master_seed,
            threshold: self.threshold,
            random_search: self.random_search,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankingConfig {
    pub rules: Vec<CategoryRule>,
}

impl Default for RankingConfig {
    fn default() -> Self {
        RankingConfig {
            rules: default_category_rules(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub master_seed: u64,
    pub cohort: CohortConfig,
    pub preprocess: PreprocessConfig,
    pub features: FeaturesConfig,
    pub ehr: EhrConfig,
    pub models: ModelsConfig,
    pub evaluation: EvaluationConfig,
    pub ranking: RankingConfig,
    pub output: OutputConfig,
    pub runtime: RuntimeConfig,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<PipelineConfig> {
        serde_json::from_str(text).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn read(path: &Path) -> Result<PipelineConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        PipelineConfig::from_json(&text)
    }

    /// Checks every section; nothing is computed before this passes.
    pub fn validate(&self) -> Result<()> {
        if let CohortSource::Synthetic(s) = &self.cohort.source {
            s.validate()?;
        }
        self.preprocess.bounds.validate()?;
        self.preprocess.params().validate()?;
        if self.features.catalog.is_empty() {
            return Err(Error::config("features.catalog", "must be \"default\" or a file path"));
        }
        if let Some(w) = &self.features.windows {
            if self.features.catalog != "default" {
                return Err(Error::config("features.windows", "only applies to the default catalog"));
            }
            Catalog::with_windows(w).map_err(|e| Error::config("features.windows", e.to_string()))?;
        }
        if !(self.ehr.drop_threshold > 0.0 && self.ehr.drop_threshold < 1.0) {
            return Err(Error::config("ehr.drop_threshold", "must lie in (0, 1)"));
        }
        if self.ehr.impute_iterations == 0 {
            return Err(Error::config("ehr.impute_iterations", "must be >= 1"));
        }
        if self.models.enabled.is_empty() {
            return Err(Error::config("models.enabled", "at least one learner is required"));
        }
        let mut seen = BTreeSet::new();
        for l in &self.models.enabled {
            if !seen.insert(l) {
                return Err(Error::config("models.enabled", format!("`{l}` listed twice")));
            }
        }
        for (learner, grid) in &self.models.grids {
            let field = format!("models.grids.{learner}");
            if grid.is_empty() {
                return Err(Error::config(field, "grid must not be empty"));
            }
            for (i, hp) in grid.iter().enumerate() {
                let f = format!("{field}[{i}]");
                if hp.learner() != *learner {
                    return Err(Error::config(f, format!("hyperparameters for `{}`", hp.learner())));
                }
                hp.validate(&f)?;
            }
        }
        self.evaluation.cv(self.master_seed).validate("evaluation")?;
        categorize_features(&[], &self.ranking.rules)?;
        if self.runtime.workers == Some(0) {
            return Err(Error::config("runtime.workers", "must be >= 1"));
        }
        Ok(())
    }

    /// Checks that files the configuration points at exist.
    pub fn check_inputs(&self) -> Result<()> {
        if let CohortSource::Files { directory } = &self.cohort.source {
            if !directory.is_dir() {
                return Err(Error::config(
                    "cohort.source.files.directory",
                    format!("`{}` is not a directory", directory.display()),
                ));
            }
        }
        if self.features.catalog != "default" && !Path::new(&self.features.catalog).is_file() {
            return Err(Error::config(
                "features.catalog",
                format!("`{}` does not exist", self.features.catalog),
            ));
        }
        Ok(())
    }

    /// SHA-256 of the configuration with output location and runtime settings removed.
    pub fn fingerprint(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output");
            map.remove("runtime");
        }
        let digest = Sha256::digest(value.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Worker count: the environment variable wins over the config.
    pub fn workers(&self) -> Result<Option<usize>> {
        match std::env::var(WORKERS_ENV) {
            Ok(v) => match v.trim().parse::<usize>() {
                Ok(n) if n >= 1 => Ok(Some(n)),
                _ => Err(Error::config(WORKERS_ENV, format!("`{v}` is not a positive integer"))),
            },
            Err(_) => Ok(self.runtime.workers),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn inverted_bounds_name_the_field() {
        let text = r#"{"preprocess": {"bounds": {"hr": [30, 200], "rr": [6, 50], "sbp": [50, 220], "dbp": [20, 19], "spo2": [60, 100]}}}"#;
        let err = PipelineConfig::from_json(text).and_then(|c| c.validate()).unwrap_err().to_string();
        assert!(err.contains("preprocess.bounds.dbp"), "{err}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(PipelineConfig::from_json(r#"{"evaluation": {"outer_fold": 5}}"#).is_err());
    }

    #[test]
    fn bad_values_fail_validation() {
        let mut c = PipelineConfig::default();
        c.evaluation.outer_folds = 1;
        assert!(c.validate().unwrap_err().to_string().contains("evaluation.outer_folds"));
        let mut c = PipelineConfig::default();
        c.models.grids.insert(Learner::Gbt, vec![default_grid(Learner::Mlp)[0].clone()]);
        assert!(c.validate().unwrap_err().to_string().contains("models.grids.gbt[0]"));
        let mut c = PipelineConfig::default();
        c.ehr.drop_threshold = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn fingerprint_ignores_output_and_workers() {
        let a = PipelineConfig::default();
        let mut b = a.clone();
        b.output.directory = PathBuf::from("elsewhere");
        b.runtime.workers = Some(3);
        assert_eq!(a.fingerprint(), b.fingerprint());
        b.master_seed = 1;
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }
}
