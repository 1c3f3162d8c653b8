//! Performance estimation: repeated random-split nested cross-validation, or
//! a fixed train/test split with bootstrap resampling of the test set.

use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::dataset::{stratified_split, DatasetError, FeatureDataset};
use crate::fingerprint::{decide_resampling, fingerprint, FingerprintError, FingerprintReport, ImagingMetadata};
use crate::metrics::{metric_set, roc_curve, MetricSet, MetricsError, RocPoint, METRIC_NAMES};
use crate::optimizer::{optimize, EnsembleMethod, LogSink, OptimizationOutcome, OptimizerConfig, OptimizerError, WorkflowError};
use crate::rng::{derive_seed, rng_from_seed, tags};
use crate::search_space::SearchSpace;
use crate::stats::{bootstrap_normal_ci, corrected_resampled_t_ci, roc_band, CiMethod, RocBand, StatsError};

/// Redraws allowed for a bootstrap resample that contains one class only.
pub const MAX_BOOTSTRAP_REDRAWS: usize = 10;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("invalid evaluation configuration: {0}")]
    InvalidConfig(String),
    #[error("train and test feature columns differ: {0}")]
    FeatureMismatch(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Fingerprint(#[from] FingerprintError),
    #[error(transparent)]
    Optimizer(#[from] OptimizerError),
    #[error("prediction failed: {0}")]
    Predict(#[from] WorkflowError),
    #[error("metric failed: {0}")]
    Metrics(#[from] MetricsError),
    #[error("interval failed: {0}")]
    Stats(#[from] StatsError),
    #[error("cannot write {path}: {message}")]
    Io { path: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    NestedCv,
    FixedSplit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub mode: EvaluationMode,
    pub k_test: usize,
    pub test_fraction: f64,
    pub n_bootstrap: usize,
    /// Seed of the outer splits and bootstrap draws. The optimizer of split
    /// `i` uses a seed derived from `optimizer.master_seed` and `i`.
    pub master_seed: u64,
    pub optimizer: OptimizerConfig,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            mode: EvaluationMode::NestedCv,
            k_test: 100,
            test_fraction: 0.2,
            n_bootstrap: 1000,
            master_seed: 0,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl EvaluationConfig {
    pub fn validate(&self) -> Result<(), EvaluationError> {
        let bad = |m: &str| Err(EvaluationError::InvalidConfig(m.to_string()));
        match self.mode {
            EvaluationMode::NestedCv if self.k_test < 2 => return bad("k_test must be at least 2"),
            EvaluationMode::FixedSplit if self.n_bootstrap < 2 => return bad("n_bootstrap must be at least 2"),
            _ => {}
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad("test_fraction must lie in (0, 1)");
        }
        self.optimizer
            .validate()
            .map_err(|e| EvaluationError::InvalidConfig(e.to_string()))
    }

    /// Optimizer settings for outer split `i`.
    pub fn optimizer_for_split(&self, i: usize) -> OptimizerConfig {
        OptimizerConfig {
            master_seed: derive_seed(self.optimizer.master_seed, &[tags::OPTIMIZER, i as u64]),
            ..self.optimizer.clone()
        }
    }
}

/// What the optimizer chose on one training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub method: EnsembleMethod,
    pub n_members: usize,
    /// Sample indices of the members in rank order.
    pub members: Vec<usize>,
    pub weights: Vec<f64>,
    pub classifier_histogram: BTreeMap<String, usize>,
    pub best_validation_f1: f64,
    pub n_failed_workflows: usize,
    pub skipped_refits: Vec<usize>,
    pub fit_number_size: Option<usize>,
    pub digest: String,
}

impl EnsembleSummary {
    pub fn from_outcome(o: &OptimizationOutcome) -> Self {
        let e = &o.ensemble;
        Self {
            method: e.method,
            n_members: e.members.len(),
            members: e.members.iter().map(|m| m.sample_index).collect(),
            weights: e.members.iter().map(|m| m.weight).collect(),
            classifier_histogram: e.classifier_histogram(),
            best_validation_f1: e.members.first().map_or(f64::NAN, |m| m.validation_score),
            n_failed_workflows: o.workflows.iter().filter(|w| w.failure.is_some()).count(),
            skipped_refits: e.skipped.clone(),
            fit_number_size: o.fit_number_size,
            digest: e.digest(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitResult {
    pub index: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub resampling_enabled: bool,
    pub metrics: MetricSet,
    pub ensemble: EnsembleSummary,
}

/// Mean and 95% interval of one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Bounds clamped to [0, 1].
    pub lower: f64,
    pub upper: f64,
    pub raw_lower: f64,
    pub raw_upper: f64,
    pub method: CiMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInfo {
    pub n_resamples: usize,
    /// Resamples kept after redrawing single-class draws.
    pub n_used: usize,
    pub n_redrawn: usize,
    pub n_skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mode: EvaluationMode,
    pub config: EvaluationConfig,
    pub space_digest: String,
    pub n_samples: usize,
    pub n_features: usize,
    pub class_labels: [String; 2],
    pub class_counts: [usize; 2],
    pub fingerprint: FingerprintReport,
    pub splits: Vec<SplitResult>,
    pub summary: BTreeMap<String, MetricSummary>,
    pub roc_band: RocBand,
    pub bootstrap: Option<BootstrapInfo>,
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    /// Members per classifier summed over all splits.
    pub fn classifier_histogram(&self) -> BTreeMap<String, usize> {
        let mut h = BTreeMap::new();
        for s in &self.splits {
            for (k, v) in &s.ensemble.classifier_histogram {
                *h.entry(k.clone()).or_insert(0) += v;
            }
        }
        h
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn write_json(&self, path: &Path) -> Result<(), EvaluationError> {
        std::fs::write(path, self.to_json() + "\n").map_err(|e| io_err(path, e))
    }

    pub fn write_per_split_csv(&self, path: &Path) -> Result<(), EvaluationError> {
        let mut w = csv_writer(path)?;
        let mut header = vec!["split", "n_train", "n_test"];
        header.extend(METRIC_NAMES);
        header.extend(["n_members", "best_validation_f1", "n_failed_workflows"]);
        w.write_record(&header).map_err(|e| io_err(path, e))?;
        for s in &self.splits {
            let mut row = vec![s.index.to_string(), s.n_train.to_string(), s.n_test.to_string()];
            row.extend(s.metrics.values().iter().map(|v| v.to_string()));
            row.push(s.ensemble.n_members.to_string());
            row.push(s.ensemble.best_validation_f1.to_string());
            row.push(s.ensemble.n_failed_workflows.to_string());
            w.write_record(&row).map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))
    }

    pub fn write_summary_csv(&self, path: &Path) -> Result<(), EvaluationError> {
        let mut w = csv_writer(path)?;
        w.write_record(["metric", "mean", "lower", "upper", "raw_lower", "raw_upper", "method"])
            .map_err(|e| io_err(path, e))?;
        for name in METRIC_NAMES {
            let m = &self.summary[name];
            let method = match m.method {
                CiMethod::CorrectedResampledT => "corrected_resampled_t",
                CiMethod::BootstrapNormal => "bootstrap_normal",
            };
            w.write_record([
                name.to_string(),
                m.mean.to_string(),
                m.lower.to_string(),
                m.upper.to_string(),
                m.raw_lower.to_string(),
                m.raw_upper.to_string(),
                method.to_string(),
            ])
            .map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))
    }

    pub fn write_roc_band_csv(&self, path: &Path) -> Result<(), EvaluationError> {
        let mut w = csv_writer(path)?;
        w.write_record(["fpr", "mean_tpr", "lower", "upper"])
            .map_err(|e| io_err(path, e))?;
        let b = &self.roc_band;
        for i in 0..b.fpr.len() {
            w.write_record([b.fpr[i], b.mean_tpr[i], b.lower[i], b.upper[i]].map(|v| v.to_string()))
                .map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> EvaluationError {
    EvaluationError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>, EvaluationError> {
    csv::Writer::from_path(path).map_err(|e| io_err(path, e))
}

fn space_digest(space: &SearchSpace) -> String {
    hex::encode(Sha256::digest(space.to_toml_string().as_bytes()))
}

fn summarize(ci: crate::stats::ConfidenceInterval) -> MetricSummary {
    let c = ci.clamped();
    MetricSummary {
        mean: ci.mean,
        lower: c.lower,
        upper: c.upper,
        raw_lower: ci.lower,
        raw_upper: ci.upper,
        method: ci.method,
    }
}

/// The search space with resampling enabled or disabled by the class
/// balance of `train`.
fn space_for(space: &SearchSpace, train: &FeatureDataset) -> Result<SearchSpace, EvaluationError> {
    Ok(space.with_resampling(decide_resampling(train.class_counts())?))
}

/// Optimizes on `train` and scores the ensemble on `test`.
fn fit_and_score(
    train: &FeatureDataset,
    test: &FeatureDataset,
    space: &SearchSpace,
    opt: &OptimizerConfig,
    log: LogSink<'_>,
) -> Result<(OptimizationOutcome, Vec<f64>, bool), EvaluationError> {
    let s = space_for(space, train)?;
    let outcome = optimize(train, &s, opt, log)?;
    let p = outcome.ensemble.predict_proba(test.values())?;
    Ok((outcome, p, s.resampling_enabled))
}

/// Repeated stratified random-split nested cross-validation. The optimizer
/// only ever sees the training part of each outer split.
pub fn run_nested_cv(
    d: &FeatureDataset,
    space: &SearchSpace,
    cfg: &EvaluationConfig,
    meta: Option<&ImagingMetadata>,
    log: LogSink<'_>,
) -> Result<EvaluationReport, EvaluationError> {
    cfg.validate()?;
    space.validate().map_err(OptimizerError::from)?;
    let fp = fingerprint(d.class_counts(), meta)?;
    let mut splits = Vec::with_capacity(cfg.k_test);
    let mut curves: Vec<Vec<RocPoint>> = Vec::with_capacity(cfg.k_test);
    for i in 0..cfg.k_test {
        let plan = stratified_split(
            d,
            cfg.test_fraction,
            derive_seed(cfg.master_seed, &[tags::OUTER_SPLIT, i as u64]),
        )?;
        let train = d.subset(&plan.train_indices)?;
        let test = d.subset(&plan.test_indices)?;
        if let Some(sink) = log {
            let _ = writeln!(sink.lock().expect("log lock"), "# outer split {i}");
        }
        let (outcome, p, resampling_enabled) =
            fit_and_score(&train, &test, space, &cfg.optimizer_for_split(i), log)?;
        curves.push(roc_curve(test.labels(), &p)?);
        splits.push(SplitResult {
            index: i,
            n_train: train.n_samples(),
            n_test: test.n_samples(),
            resampling_enabled,
            metrics: metric_set(test.labels(), &p)?,
            ensemble: EnsembleSummary::from_outcome(&outcome),
        });
    }
    let (n_train, n_test) = (splits[0].n_train, splits[0].n_test);
    let mut summary = BTreeMap::new();
    for (m, name) in METRIC_NAMES.iter().enumerate() {
        let values: Vec<f64> = splits.iter().map(|s| s.metrics.values()[m]).collect();
        summary.insert(
            name.to_string(),
            summarize(corrected_resampled_t_ci(&values, n_train, n_test)?),
        );
    }
    Ok(EvaluationReport {
        mode: EvaluationMode::NestedCv,
        config: cfg.clone(),
        space_digest: space_digest(space),
        n_samples: d.n_samples(),
        n_features: d.n_features(),
        class_labels: d.class_labels().clone(),
        class_counts: d.class_counts(),
        fingerprint: fp,
        splits,
        summary,
        roc_band: roc_band(&curves)?,
        bootstrap: None,
        warnings: Vec::new(),
    })
}

/// Reasons to distrust a fixed split: shared sample IDs or identical data.
pub fn leakage_warnings(train: &FeatureDataset, test: &FeatureDataset) -> Vec<String> {
    let mut w = Vec::new();
    let ids: std::collections::HashSet<&String> = train.sample_ids().iter().collect();
    let shared = test.sample_ids().iter().filter(|s| ids.contains(s)).count();
    if shared > 0 {
        w.push(format!(
            "possible leakage: {shared} test sample IDs also appear in the training set"
        ));
    }
    if train.labels() == test.labels() && train.values().same_values(test.values()) {
        w.push("possible leakage: test set is identical to the training set; metrics are optimistic".to_string());
    }
    w
}

/// One optimization on `train`, point metrics on `test`, and bootstrap
/// intervals over resamples of the test rows.
pub fn run_fixed_split(
    train: &FeatureDataset,
    test: &FeatureDataset,
    space: &SearchSpace,
    cfg: &EvaluationConfig,
    meta: Option<&ImagingMetadata>,
    log: LogSink<'_>,
) -> Result<EvaluationReport, EvaluationError> {
    cfg.validate()?;
    space.validate().map_err(OptimizerError::from)?;
    if train.feature_names() != test.feature_names() {
        let first = train
            .feature_names()
            .iter()
            .zip(test.feature_names())
            .position(|(a, b)| a != b)
            .unwrap_or(train.n_features().min(test.n_features()));
        return Err(EvaluationError::FeatureMismatch(format!(
            "{} train vs {} test columns, first difference at column {}",
            train.n_features(),
            test.n_features(),
            first
        )));
    }
    let fp = fingerprint(train.class_counts(), meta)?;
    let warnings = leakage_warnings(train, test);
    let opt = cfg.optimizer_for_split(0);
    let (outcome, p, resampling_enabled) = fit_and_score(train, test, space, &opt, log)?;
    let labels = test.labels();
    let point = metric_set(labels, &p)?;

    let n = labels.len();
    let mut rng = rng_from_seed(derive_seed(cfg.master_seed, &[tags::BOOTSTRAP]));
    let mut boot: Vec<[f64; 8]> = Vec::with_capacity(cfg.n_bootstrap);
    let mut curves = Vec::with_capacity(cfg.n_bootstrap);
    let (mut redrawn, mut skipped) = (0, 0);
    for _ in 0..cfg.n_bootstrap {
        let mut drawn = None;
        for attempt in 0..=MAX_BOOTSTRAP_REDRAWS {
            let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let l: Vec<u8> = idx.iter().map(|&i| labels[i]).collect();
            if l.contains(&0) && l.contains(&1) {
                drawn = Some((idx, l));
                break;
            }
            if attempt < MAX_BOOTSTRAP_REDRAWS {
                redrawn += 1;
            }
        }
        let Some((idx, l)) = drawn else {
            skipped += 1;
            continue;
        };
        let s: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
        boot.push(metric_set(&l, &s)?.values());
        curves.push(roc_curve(&l, &s)?);
    }
    let mut summary = BTreeMap::new();
    for (m, name) in METRIC_NAMES.iter().enumerate() {
        let values: Vec<f64> = boot.iter().map(|b| b[m]).collect();
        summary.insert(
            name.to_string(),
            summarize(bootstrap_normal_ci(point.values()[m], &values)?),
        );
    }
    Ok(EvaluationReport {
        mode: EvaluationMode::FixedSplit,
        config: cfg.clone(),
        space_digest: space_digest(space),
        n_samples: train.n_samples() + test.n_samples(),
        n_features: train.n_features(),
        class_labels: train.class_labels().clone(),
        class_counts: train.class_counts(),
        fingerprint: fp,
        splits: vec![SplitResult {
            index: 0,
            n_train: train.n_samples(),
            n_test: test.n_samples(),
            resampling_enabled,
            metrics: point,
            ensemble: EnsembleSummary::from_outcome(&outcome),
        }],
        summary,
        roc_band: roc_band(&curves)?,
        bootstrap: Some(BootstrapInfo {
            n_resamples: cfg.n_bootstrap,
            n_used: boot.len(),
            n_redrawn: redrawn,
            n_skipped: skipped,
        }),
        warnings,
    })
}
