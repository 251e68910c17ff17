//! Stage runners behind the command line. Each stage reads its inputs from
//! the output directory (or the configured cohort files), writes its
//! artifacts there and returns a one-line summary.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cohort::{
    derive_labels, generate_synthetic_cohort, load_cohort, read_labels, select_patients, write_cohort, write_labels,
    CohortPaths, LabelTable,
};
use crate::config::{CohortSource, FeatureSet, PipelineConfig};
use crate::ehr::{audit_columns, drop_sparse_columns, rf_impute, ColumnAudit, ColumnData, EhrTable};
use crate::error::{Error, Result};
use crate::eval::{nested_cv, EvalReport};
use crate::features::{extract_features, FeatureMatrix};
use crate::learners::{fit, DesignMatrix, ForestParams, Hyperparameters, Learner};
use crate::provenance::{read_json, write_json, Provenance};
use crate::pts::{preprocess_cohort, read_signals, write_audit, write_signals};
use crate::ranking::ImportanceReport;
use crate::seed::{self, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Synth,
    Preprocess,
    Features,
    Impute,
    Evaluate,
    Rank,
    All,
}

impl Command {
    pub const STAGES: [Command; 6] = [
        Command::Synth,
        Command::Preprocess,
        Command::Features,
        Command::Impute,
        Command::Evaluate,
        Command::Rank,
    ];
}

/// Artifact locations inside the output directory.
#[derive(Debug, Clone)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Layout {
        Layout { root: root.into() }
    }
    pub fn cohort_dir(&self) -> PathBuf {
        self.root.join("cohort")
    }
    pub fn labels(&self) -> PathBuf {
        self.root.join("labels.csv")
    }
    pub fn pts_clean(&self) -> PathBuf {
        self.root.join("pts_clean.csv")
    }
    pub fn preprocess_audit(&self) -> PathBuf {
        self.root.join("preprocess_audit.csv")
    }
    pub fn pts_features(&self) -> PathBuf {
        self.root.join("pts_features.csv")
    }
    pub fn ehr_audit(&self) -> PathBuf {
        self.root.join("ehr_audit.json")
    }
    pub fn ehr_imputed(&self) -> PathBuf {
        self.root.join("ehr_imputed.csv")
    }
    pub fn eval_report(&self) -> PathBuf {
        self.root.join("eval_report.json")
    }
    pub fn eval_folds(&self) -> PathBuf {
        self.root.join("eval_folds.csv")
    }
    pub fn importance(&self) -> PathBuf {
        self.root.join("importance.csv")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhrAuditReport {
    pub master_seed: u64,
    pub config_fingerprint: String,
    pub drop_threshold: f64,
    pub n_patients: usize,
    pub columns: Vec<ColumnAudit>,
}

pub struct Pipeline {
    config: PipelineConfig,
    layout: Layout,
    provenance: Provenance,
}

impl Pipeline {
    /// Validates the configuration; nothing is read or written here.
    pub fn new(config: PipelineConfig) -> Result<Pipeline> {
        config.validate()?;
        let layout = Layout::new(&config.output.directory);
        let provenance = Provenance {
            master_seed: config.master_seed,
            config_fingerprint: config.fingerprint(),
        };
        Ok(Pipeline {
            config,
            layout,
            provenance,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// Runs one command; `All` chains every stage and returns one summary per stage.
    pub fn run(&self, command: Command) -> Result<Vec<String>> {
        self.config.check_inputs()?;
        std::fs::create_dir_all(&self.layout.root).map_err(|e| Error::io(&self.layout.root, e))?;
        match command {
            Command::All => {
                let mut out = Vec::new();
                for stage in Command::STAGES {
                    if stage == Command::Synth && !matches!(self.config.cohort.source, CohortSource::Synthetic(_)) {
                        continue;
                    }
                    out.push(self.run_stage(stage)?);
                }
                Ok(out)
            }
            c => Ok(vec![self.run_stage(c)?]),
        }
    }

    fn run_stage(&self, command: Command) -> Result<String> {
        match command {
            Command::Synth => self.synth(),
            Command::Preprocess => self.preprocess(),
            Command::Features => self.features(),
            Command::Impute => self.impute(),
            Command::Evaluate => self.evaluate(),
            Command::Rank => self.rank(),
            Command::All => unreachable!("expanded by run"),
        }
    }

    fn cohort_paths(&self) -> CohortPaths {
        match &self.config.cohort.source {
            CohortSource::Synthetic(_) => CohortPaths::in_dir(&self.layout.cohort_dir()),
            CohortSource::Files { directory } => CohortPaths::in_dir(directory),
        }
    }

    pub fn synth(&self) -> Result<String> {
        let CohortSource::Synthetic(synth) = &self.config.cohort.source else {
            return Err(Error::config("cohort.source", "`synth` needs a synthetic cohort source"));
        };
        let dir = self.layout.cohort_dir();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let (dataset, labels) = generate_synthetic_cohort(synth, self.config.master_seed)?;
        write_cohort(&dataset, &CohortPaths::in_dir(&dir), Some(&self.provenance))?;
        Ok(format!(
            "synth: {} patients ({} favorable) -> {}",
            dataset.patients.len(),
            labels.count_favorable(),
            dir.display()
        ))
    }

    pub fn preprocess(&self) -> Result<String> {
        let paths = self.cohort_paths();
        require(&paths.patients)?;
        let dataset = select_patients(&load_cohort(&paths, &self.config.ehr.categorical)?);
        let labels = derive_labels(&dataset)?;
        let (signals, audit) =
            preprocess_cohort(&dataset, &self.config.preprocess.bounds, &self.config.preprocess.params())?;
        write_labels(&labels, &self.layout.labels(), Some(&self.provenance))?;
        write_signals(&signals, &self.layout.pts_clean(), Some(&self.provenance))?;
        write_audit(&audit, &self.layout.preprocess_audit(), Some(&self.provenance))?;
        Ok(format!(
            "preprocess: {} eligible patients, {} signals cleaned",
            labels.len(),
            audit.len()
        ))
    }

    pub fn features(&self) -> Result<String> {
        let labels = self.labels()?;
        require(&self.layout.pts_clean())?;
        let signals = read_signals(&self.layout.pts_clean())?;
        let catalog = self.config.features.load_catalog()?;
        let m = extract_features(&signals, &patient_ids(&labels), &catalog);
        m.write_csv(&self.layout.pts_features(), Some(&self.provenance))?;
        let missing = m.rows.iter().flatten().filter(|v| v.is_none()).count();
        Ok(format!(
            "features: {} patients x {} features, {} missing cells",
            m.n_rows(),
            m.n_cols(),
            missing
        ))
    }

    pub fn impute(&self) -> Result<String> {
        let labels = self.labels()?;
        let paths = self.cohort_paths();
        require(&paths.ehr)?;
        let ehr = EhrTable::read_csv(&paths.ehr, &self.config.ehr.categorical)?;
        let ehr = align_rows(&ehr, &patient_ids(&labels))?;
        let threshold = self.config.ehr.drop_threshold;
        let audit = audit_columns(&ehr, threshold);
        let kept = drop_sparse_columns(&ehr, threshold);
        let before = kept.n_missing();
        let imputed = rf_impute(&kept, self.config.ehr.impute_iterations, self.config.master_seed)?;
        imputed.write_csv(&self.layout.ehr_imputed(), Some(&self.provenance))?;
        let report = EhrAuditReport {
            master_seed: self.provenance.master_seed,
            config_fingerprint: self.provenance.config_fingerprint.clone(),
            drop_threshold: threshold,
            n_patients: ehr.n_rows(),
            columns: audit,
        };
        write_json(&self.layout.ehr_audit(), &report)?;
        Ok(format!(
            "impute: {} of {} columns kept, {} cells imputed",
            kept.columns.len(),
            ehr.columns.len(),
            before
        ))
    }

    /// Labels and the configured design matrix, rows in label order.
    pub fn design(&self) -> Result<(DesignMatrix, Vec<u8>)> {
        let labels = self.labels()?;
        let ids = patient_ids(&labels);
        let features = match self.config.models.feature_set {
            FeatureSet::Ehr => None,
            _ => {
                require(&self.layout.pts_features())?;
                Some(FeatureMatrix::read_csv(&self.layout.pts_features())?.select_rows(&ids)?)
            }
        };
        let ehr = match self.config.models.feature_set {
            FeatureSet::Pts => None,
            _ => {
                require(&self.layout.ehr_imputed())?;
                let t = EhrTable::read_csv(&self.layout.ehr_imputed(), &self.config.ehr.categorical)?;
                Some(align_rows(&t, &ids)?)
            }
        };
        let x = assemble_design(features.as_ref(), ehr.as_ref())?;
        Ok((x, labels.targets(self.config.cohort.outcome)))
    }

    pub fn evaluate(&self) -> Result<String> {
        let (x, y) = self.design()?;
        let cv = self.config.evaluation.cv(self.config.master_seed);
        let mut report = nested_cv(&x, &y, &self.config.models.specs(), &cv)?;
        report.config_fingerprint = Some(self.provenance.config_fingerprint.clone());
        write_json(&self.layout.eval_report(), &report)?;
        report.write_fold_csv(&self.layout.eval_folds(), Some(&self.provenance))?;
        let best = report
            .models
            .iter()
            .filter_map(|m| m.mean_auc.map(|a| (a, m.model.as_str())))
            .max_by(|a, b| a.0.total_cmp(&b.0));
        let failures: usize = report.models.iter().map(|m| m.failures.len()).sum();
        Ok(match best {
            Some((auc, name)) => format!(
                "evaluate: {} models on {} patients x {} features, best {} mean AUC {:.4}, {} failed fits",
                report.models.len(),
                x.n_rows(),
                x.n_cols(),
                name,
                auc,
                failures
            ),
            None => format!("evaluate: no model produced an estimate, {failures} failed fits"),
        })
    }

    /// Forest hyperparameters most often selected during evaluation, or the
    /// first grid point when no evaluation is available.
    pub fn ranking_params(&self) -> Result<ForestParams> {
        if self.layout.eval_report().is_file() {
            let report: EvalReport = read_json(&self.layout.eval_report())?;
            if let Some(p) = modal_forest_params(&report) {
                return Ok(p);
            }
        }
        let spec = self
            .config
            .models
            .specs()
            .into_iter()
            .find(|s| s.learner == Learner::RandomForest);
        Ok(match spec.and_then(|s| s.grid.into_iter().next()) {
            Some(Hyperparameters::RandomForest(p)) => p,
            _ => ForestParams::default(),
        })
    }

    pub fn rank(&self) -> Result<String> {
        let (x, y) = self.design()?;
        let params = self.ranking_params()?;
        let model = fit(
            &x,
            &y,
            &Hyperparameters::RandomForest(params),
            seed::derive(self.config.master_seed, &[tag::RANK]),
        )?;
        let report = ImportanceReport::build(&model, &x, &y, &self.config.ranking.rules)?;
        report.write_csv(&self.layout.importance(), Some(&self.provenance))?;
        let top: Vec<&str> = report.rows.iter().take(3).map(|r| r.feature.as_str()).collect();
        Ok(format!("rank: {} features ranked, top: {}", report.rows.len(), top.join(", ")))
    }

    fn labels(&self) -> Result<LabelTable> {
        require(&self.layout.labels())?;
        read_labels(&self.layout.labels())
    }
}

fn require(path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "missing input `{}`; run the earlier stage first",
            path.display()
        )))
    }
}

fn patient_ids(labels: &LabelTable) -> Vec<String> {
    labels.entries.iter().map(|e| e.patient_id.clone()).collect()
}

/// Reorders (and subsets) table rows to `ids`; every id must be present.
pub fn align_rows(table: &EhrTable, ids: &[String]) -> Result<EhrTable> {
    let index: HashMap<&str, usize> = table
        .patient_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let rows = ids
        .iter()
        .map(|id| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::SchemaMismatch(format!("patient `{id}` has no EHR row")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(table.select_rows(&rows))
}

/// Column-binds PTS features and EHR variables into a numeric design.
///
/// Categorical EHR columns become one indicator per level (`name=level`).
/// Missing PTS cells take the column median; columns with no observed value
/// are dropped. EHR cells must already be complete.
pub fn assemble_design(features: Option<&FeatureMatrix>, ehr: Option<&EhrTable>) -> Result<DesignMatrix> {
    let mut names = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if let (Some(f), Some(e)) = (features, ehr) {
        if f.patient_ids != e.patient_ids {
            return Err(Error::SchemaMismatch("PTS features and EHR table cover different patients".into()));
        }
    }
    if let Some(f) = features {
        for (j, name) in f.names.iter().enumerate() {
            let col: Vec<Option<f64>> = f.column(j).collect();
            let mut observed: Vec<f64> = col.iter().flatten().copied().collect();
            if observed.is_empty() {
                continue;
            }
            let fill = crate::pts::median(&mut observed);
            names.push(name.clone());
            cols.push(col.into_iter().map(|v| v.unwrap_or(fill)).collect());
        }
    }
    if let Some(e) = ehr {
        for c in &e.columns {
            let incomplete = || Error::InvalidInput(format!("EHR column `{}` still has missing cells", c.name));
            match &c.data {
                ColumnData::Numeric(v) => {
                    names.push(c.name.clone());
                    cols.push(v.iter().map(|x| x.ok_or_else(incomplete)).collect::<Result<_>>()?);
                }
                ColumnData::Categorical { levels, codes } => {
                    for (k, level) in levels.iter().enumerate() {
                        names.push(format!("{}={}", c.name, level));
                        cols.push(
                            codes
                                .iter()
                                .map(|x| x.map(|x| f64::from(u8::from(x as usize == k))).ok_or_else(incomplete))
                                .collect::<Result<_>>()?,
                        );
                    }
                }
            }
        }
    }
    if names.is_empty() {
        return Err(Error::InvalidInput("design matrix has no columns".into()));
    }
    DesignMatrix::new(names, cols)
}

fn modal_forest_params(report: &EvalReport) -> Option<ForestParams> {
    let model = report.model(Learner::RandomForest.as_str())?;
    let mut counts: BTreeMap<String, (usize, ForestParams)> = BTreeMap::new();
    for e in &model.estimates {
        if let Some(Hyperparameters::RandomForest(p)) = &e.hyperparameters {
            let key = serde_json::to_string(p).expect("params serialize");
            counts.entry(key).or_insert((0, *p)).0 += 1;
        }
    }
    // Highest count; ties go to the lexicographically first encoding.
    let mut best: Option<(usize, ForestParams)> = None;
    for (_, (n, p)) in counts {
        if best.as_ref().map_or(true, |(b, _)| n > *b) {
            best = Some((n, p));
        }
    }
    best.map(|(_, p)| p)
}
