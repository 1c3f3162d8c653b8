//! Random search over workflows, ranking, and ensemble construction.
//!
//! Every sampled workflow is scored by its mean weighted F1 over
//! `k_training` stratified random 80/20 splits of the training set (the same
//! splits for every workflow). Workflows are ranked by that score and the
//! best are refit on the full training set and averaged.

pub mod workflow;

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::Mutex;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{stratified_split_labels, DatasetError, FeatureDataset, SplitPlan};
use crate::metrics::{f1_weighted, hard_labels};
use crate::rng::{derive_seed, rng_from_seed, tags};
use crate::search_space::{SearchSpace, SpaceError, WorkflowConfig};
pub use workflow::{FittedWorkflow, WorkflowError};

/// Score given to a workflow that failed on any validation split.
pub const FAILED_SCORE: f64 = -1.0;
/// Largest ensemble size considered by FitNumber.
pub const FIT_NUMBER_MAX: usize = 100;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("no viable workflow: every candidate failed")]
    NoViableWorkflow,
    #[error("invalid optimizer configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot split training data: {0}")]
    Dataset(#[from] DatasetError),
    #[error("invalid search space: {0}")]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleMethod {
    TopN,
    FitNumber,
    ForwardSelection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForwardSelectionConfig {
    pub n_bags: usize,
    pub bag_fraction: f64,
    pub max_rounds: usize,
}

impl Default for ForwardSelectionConfig {
    fn default() -> Self {
        Self {
            n_bags: 20,
            bag_fraction: 0.5,
            max_rounds: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub n_random_search: usize,
    pub ensemble_method: EnsembleMethod,
    pub n_ensemble: usize,
    pub k_training: usize,
    pub validation_fraction: f64,
    pub master_seed: u64,
    pub forward_selection: ForwardSelectionConfig,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            n_random_search: 1000,
            ensemble_method: EnsembleMethod::TopN,
            n_ensemble: 100,
            k_training: 5,
            validation_fraction: 0.2,
            master_seed: 0,
            forward_selection: ForwardSelectionConfig::default(),
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<(), OptimizerError> {
        let bad = |m: String| Err(OptimizerError::InvalidConfig(m));
        if self.n_random_search == 0 {
            return bad("n_random_search must be at least 1".into());
        }
        if self.n_ensemble == 0 || self.n_ensemble > self.n_random_search {
            return bad(format!(
                "n_ensemble ({}) must be between 1 and n_random_search ({})",
                self.n_ensemble, self.n_random_search
            ));
        }
        if self.k_training == 0 {
            return bad("k_training must be at least 1".into());
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)".into());
        }
        let fs = &self.forward_selection;
        if fs.n_bags == 0 || fs.max_rounds == 0 || !(fs.bag_fraction > 0.0 && fs.bag_fraction <= 1.0) {
            return bad("forward_selection needs n_bags >= 1, max_rounds >= 1, bag_fraction in (0, 1]".into());
        }
        Ok(())
    }
}

/// Validation results for one sampled workflow.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluatedWorkflow {
    /// Position in sampling order.
    pub index: usize,
    pub config: WorkflowConfig,
    pub fold_scores: Vec<f64>,
    pub mean_score: f64,
    /// Posteriors on each validation split, in split row order.
    #[serde(skip)]
    pub val_posteriors: Vec<Vec<f64>>,
    pub failure: Option<String>,
}

impl EvaluatedWorkflow {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Stratified random resplits of the training set shared by all workflows.
pub fn inner_splits(labels: &[u8], cfg: &OptimizerConfig) -> Result<Vec<SplitPlan>, DatasetError> {
    (0..cfg.k_training)
        .map(|f| {
            stratified_split_labels(
                labels,
                cfg.validation_fraction,
                derive_seed(cfg.master_seed, &[tags::INNER_SPLITS, f as u64]),
            )
        })
        .collect()
}

pub fn evaluate_workflow(
    index: usize,
    config: &WorkflowConfig,
    data: &FeatureDataset,
    splits: &[SplitPlan],
    group_slots: &[usize],
) -> EvaluatedWorkflow {
    let mut fold_scores = Vec::with_capacity(splits.len());
    let mut val_posteriors = Vec::with_capacity(splits.len());
    let mut failure = None;
    for s in splits {
        let x = data.values().select_rows(&s.train_indices);
        let y: Vec<u8> = s.train_indices.iter().map(|&i| data.labels()[i]).collect();
        let vx = data.values().select_rows(&s.test_indices);
        let vy: Vec<u8> = s.test_indices.iter().map(|&i| data.labels()[i]).collect();
        let result = FittedWorkflow::fit(config, &x, &y, group_slots).and_then(|w| w.predict_proba(&vx));
        match result {
            Ok(p) => {
                fold_scores.push(f1_weighted(&vy, &hard_labels(&p)).unwrap_or(0.0));
                val_posteriors.push(p);
            }
            Err(e) => {
                failure = Some(e.to_string());
                break;
            }
        }
    }
    let mean_score = if failure.is_some() {
        fold_scores = vec![FAILED_SCORE; splits.len()];
        FAILED_SCORE
    } else {
        fold_scores.iter().sum::<f64>() / fold_scores.len() as f64
    };
    EvaluatedWorkflow {
        index,
        config: config.clone(),
        fold_scores,
        mean_score,
        val_posteriors,
        failure,
    }
}

/// Positions ordered by descending mean score, ties by sampling order.
pub fn rank_workflows(evaluated: &[EvaluatedWorkflow]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..evaluated.len()).collect();
    order.sort_by(|&a, &b| {
        evaluated[b]
            .mean_score
            .total_cmp(&evaluated[a].mean_score)
            .then(evaluated[a].index.cmp(&evaluated[b].index))
    });
    order
}

/// Mean over validation splits of the weighted F1 of the averaged
/// posteriors of `members` (position, weight).
pub fn validation_score(
    members: &[(usize, f64)],
    evaluated: &[EvaluatedWorkflow],
    split_labels: &[Vec<u8>],
) -> f64 {
    let total: f64 = members.iter().map(|m| m.1).sum();
    let mut score = 0.0;
    for (f, labels) in split_labels.iter().enumerate() {
        let mut avg = vec![0.0; labels.len()];
        for &(pos, w) in members {
            for (a, p) in avg.iter_mut().zip(&evaluated[pos].val_posteriors[f]) {
                *a += w * p;
            }
        }
        avg.iter_mut().for_each(|a| *a /= total);
        score += f1_weighted(labels, &hard_labels(&avg)).unwrap_or(0.0);
    }
    score / split_labels.len() as f64
}

fn fold_f1(sums: &[Vec<f64>], count: f64, labels: &[Vec<u8>]) -> f64 {
    let mut s = 0.0;
    for (sum, l) in sums.iter().zip(labels) {
        let avg: Vec<f64> = sum.iter().map(|v| v / count).collect();
        s += f1_weighted(l, &hard_labels(&avg)).unwrap_or(0.0);
    }
    s / labels.len() as f64
}

/// Ensemble size in 1..=min(100, viable) with the best validation score of
/// the top-j average; the smallest size wins ties.
pub fn fit_number_size(ranked: &[usize], evaluated: &[EvaluatedWorkflow], split_labels: &[Vec<u8>]) -> usize {
    let viable: Vec<usize> = ranked.iter().copied().filter(|&p| !evaluated[p].failed()).collect();
    let mut sums: Vec<Vec<f64>> = split_labels.iter().map(|l| vec![0.0; l.len()]).collect();
    let (mut best_j, mut best) = (1, f64::NEG_INFINITY);
    for (j, &pos) in viable.iter().take(FIT_NUMBER_MAX).enumerate() {
        for (s, p) in sums.iter_mut().zip(&evaluated[pos].val_posteriors) {
            for (a, b) in s.iter_mut().zip(p) {
                *a += b;
            }
        }
        let score = fold_f1(&sums, (j + 1) as f64, split_labels);
        if score > best {
            best = score;
            best_j = j + 1;
        }
    }
    best_j
}

/// Bagged greedy forward selection with replacement. Returns selection
/// counts per position (zero for never-selected candidates).
pub fn forward_selection_counts(
    ranked: &[usize],
    evaluated: &[EvaluatedWorkflow],
    split_labels: &[Vec<u8>],
    cfg: &ForwardSelectionConfig,
    seed: u64,
) -> BTreeMap<usize, usize> {
    let pool: Vec<usize> = ranked.iter().copied().filter(|&p| !evaluated[p].failed()).collect();
    let mut counts = BTreeMap::new();
    if pool.is_empty() {
        return counts;
    }
    let size = ((cfg.bag_fraction * pool.len() as f64).round() as usize).clamp(1, pool.len());
    for b in 0..cfg.n_bags {
        let mut rng = rng_from_seed(derive_seed(seed, &[tags::FORWARD_SELECTION, b as u64]));
        let mut bag = sample(&mut rng, pool.len(), size).into_vec();
        bag.sort_unstable();
        let mut sums: Vec<Vec<f64>> = split_labels.iter().map(|l| vec![0.0; l.len()]).collect();
        for round in 0..cfg.max_rounds {
            let mut best: Option<(f64, usize)> = None;
            for &c in &bag {
                let pos = pool[c];
                let trial: Vec<Vec<f64>> = sums
                    .iter()
                    .zip(&evaluated[pos].val_posteriors)
                    .map(|(s, p)| s.iter().zip(p).map(|(a, b)| a + b).collect())
                    .collect();
                let score = fold_f1(&trial, (round + 1) as f64, split_labels);
                if best.is_none_or(|(s, _)| score > s) {
                    best = Some((score, pos));
                }
            }
            let (_, pos) = best.expect("bag is nonempty");
            for (s, p) in sums.iter_mut().zip(&evaluated[pos].val_posteriors) {
                for (a, b) in s.iter_mut().zip(p) {
                    *a += b;
                }
            }
            *counts.entry(pos).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleMember {
    pub sample_index: usize,
    pub weight: f64,
    pub validation_score: f64,
    pub workflow: FittedWorkflow,
}

/// Weighted average of member posteriors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ensemble {
    pub method: EnsembleMethod,
    pub members: Vec<EnsembleMember>,
    /// Sample indices whose refit on the full training set failed.
    pub skipped: Vec<usize>,
}

impl Ensemble {
    pub fn predict_proba(&self, x: &crate::Matrix) -> Result<Vec<f64>, WorkflowError> {
        let total: f64 = self.members.iter().map(|m| m.weight).sum();
        let mut out = vec![0.0; x.nrows()];
        for m in &self.members {
            let p = m.workflow.predict_proba(x)?;
            for (o, v) in out.iter_mut().zip(p) {
                *o += m.weight * v;
            }
        }
        out.iter_mut().for_each(|o| *o /= total);
        Ok(out)
    }

    /// Member count per classifier name.
    pub fn classifier_histogram(&self) -> BTreeMap<String, usize> {
        let mut h = BTreeMap::new();
        for m in &self.members {
            let name = serde_json::to_value(m.workflow.classifier.kind())
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            *h.entry(name).or_insert(0) += 1;
        }
        h
    }

    /// SHA-256 of the serialized ensemble; equal digests mean identical
    /// fitted state.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("ensemble serializes")))
    }
}

/// Refits the given (position, weight) members in order on the full
/// training set, skipping any whose refit fails.
fn refit(
    method: EnsembleMethod,
    members: &[(usize, f64)],
    evaluated: &[EvaluatedWorkflow],
    data: &FeatureDataset,
    group_slots: &[usize],
    limit: usize,
) -> Result<Ensemble, OptimizerError> {
    let fitted: Vec<Result<FittedWorkflow, WorkflowError>> = members
        .par_iter()
        .map(|&(pos, _)| FittedWorkflow::fit(&evaluated[pos].config, data.values(), data.labels(), group_slots))
        .collect();
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for (&(pos, weight), f) in members.iter().zip(fitted) {
        if out.len() >= limit {
            break;
        }
        match f {
            Ok(workflow) => out.push(EnsembleMember {
                sample_index: evaluated[pos].index,
                weight,
                validation_score: evaluated[pos].mean_score,
                workflow,
            }),
            Err(_) => skipped.push(evaluated[pos].index),
        }
    }
    if out.is_empty() {
        return Err(OptimizerError::NoViableWorkflow);
    }
    Ok(Ensemble {
        method,
        members: out,
        skipped,
    })
}

/// The best `n` non-failed workflows, refit and equally weighted. A member
/// whose refit fails is replaced by the next one in rank order.
pub fn build_topn(
    ranked: &[usize],
    evaluated: &[EvaluatedWorkflow],
    n: usize,
    data: &FeatureDataset,
    group_slots: &[usize],
    method: EnsembleMethod,
) -> Result<Ensemble, OptimizerError> {
    let viable: Vec<(usize, f64)> = ranked
        .iter()
        .filter(|&&p| !evaluated[p].failed())
        .map(|&p| (p, 1.0))
        .collect();
    if viable.is_empty() {
        return Err(OptimizerError::NoViableWorkflow);
    }
    // Refit a few spares up front so failures can be replaced.
    let take = (n + n.div_ceil(4)).min(viable.len());
    match refit(method, &viable[..take], evaluated, data, group_slots, n) {
        Ok(e) if e.members.len() == n.min(viable.len()) || take == viable.len() => Ok(e),
        _ => refit(method, &viable, evaluated, data, group_slots, n),
    }
}

/// Labels of each inner validation split.
pub fn split_labels(data: &FeatureDataset, splits: &[SplitPlan]) -> Vec<Vec<u8>> {
    splits
        .iter()
        .map(|s| s.test_indices.iter().map(|&i| data.labels()[i]).collect())
        .collect()
}

/// Summary line for one evaluated workflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowSummary {
    pub index: usize,
    pub mean_score: f64,
    pub fold_scores: Vec<f64>,
    pub classifier: String,
    pub digest: String,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationOutcome {
    pub ensemble: Ensemble,
    /// Sample indices in rank order.
    pub ranked: Vec<usize>,
    pub workflows: Vec<WorkflowSummary>,
    /// Ensemble size chosen by FitNumber, when used.
    pub fit_number_size: Option<usize>,
}

/// Shared sink for per-workflow log lines.
pub type LogSink<'a> = Option<&'a Mutex<Box<dyn Write + Send>>>;

/// Runs the random search on `train` and builds the ensemble.
pub fn optimize(
    train: &FeatureDataset,
    space: &SearchSpace,
    cfg: &OptimizerConfig,
    log: LogSink<'_>,
) -> Result<OptimizationOutcome, OptimizerError> {
    cfg.validate()?;
    space.validate()?;
    let splits = inner_splits(train.labels(), cfg)?;
    let (_, slots) = train.group_slots();
    let evaluated: Vec<EvaluatedWorkflow> = (0..cfg.n_random_search)
        .into_par_iter()
        .map(|j| {
            let config = space.sample(derive_seed(cfg.master_seed, &[tags::SAMPLE, j as u64]));
            let ev = evaluate_workflow(j, &config, train, &splits, &slots);
            if let Some(sink) = log {
                let mut w = sink.lock().expect("log lock");
                let _ = writeln!(
                    w,
                    "{}\t{:.6}\t{}\t{}",
                    j,
                    ev.mean_score,
                    config.digest(),
                    classifier_name(&config)
                );
            }
            ev
        })
        .collect();
    let ranked = rank_workflows(&evaluated);
    let labels = split_labels(train, &splits);
    let mut fit_number = None;
    let ensemble = match cfg.ensemble_method {
        EnsembleMethod::TopN => build_topn(&ranked, &evaluated, cfg.n_ensemble, train, &slots, EnsembleMethod::TopN)?,
        EnsembleMethod::FitNumber => {
            if ranked.iter().all(|&p| evaluated[p].failed()) {
                return Err(OptimizerError::NoViableWorkflow);
            }
            let j = fit_number_size(&ranked, &evaluated, &labels);
            fit_number = Some(j);
            build_topn(&ranked, &evaluated, j, train, &slots, EnsembleMethod::FitNumber)?
        }
        EnsembleMethod::ForwardSelection => {
            let counts = forward_selection_counts(
                &ranked,
                &evaluated,
                &labels,
                &cfg.forward_selection,
                cfg.master_seed,
            );
            if counts.is_empty() {
                return Err(OptimizerError::NoViableWorkflow);
            }
            let total: usize = counts.values().sum();
            let members: Vec<(usize, f64)> = ranked
                .iter()
                .filter_map(|p| counts.get(p).map(|&c| (*p, c as f64 / total as f64)))
                .collect();
            refit(
                EnsembleMethod::ForwardSelection,
                &members,
                &evaluated,
                train,
                &slots,
                members.len(),
            )?
        }
    };
    let workflows = evaluated
        .iter()
        .map(|e| WorkflowSummary {
            index: e.index,
            mean_score: e.mean_score,
            fold_scores: e.fold_scores.clone(),
            classifier: classifier_name(&e.config),
            digest: e.config.digest(),
            failure: e.failure.clone(),
        })
        .collect();
    Ok(OptimizationOutcome {
        ensemble,
        ranked: ranked.iter().map(|&p| evaluated[p].index).collect(),
        workflows,
        fit_number_size: fit_number,
    })
}

fn classifier_name(c: &WorkflowConfig) -> String {
    serde_json::to_value(c.classifier.choice)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fake(index: usize, mean: f64, posts: Vec<Vec<f64>>) -> EvaluatedWorkflow {
        let space = crate::search_space::default_space(false);
        EvaluatedWorkflow {
            index,
            config: space.sample(index as u64),
            fold_scores: vec![mean],
            mean_score: mean,
            val_posteriors: posts,
            failure: (mean == FAILED_SCORE).then(|| "failed".to_string()),
        }
    }

    #[test]
    fn ranking_orders_by_score_then_index() {
        let ev: Vec<_> = [0.5, 0.9, 0.7].iter().enumerate().map(|(i, &m)| fake(i, m, vec![])).collect();
        assert_eq!(rank_workflows(&ev), vec![1, 2, 0]);
        let ev: Vec<_> = (0..4).map(|i| fake(i, 0.5, vec![])).collect();
        assert_eq!(rank_workflows(&ev), vec![0, 1, 2, 3]);
        let ev: Vec<_> = [FAILED_SCORE, 0.0, 0.2].iter().enumerate().map(|(i, &m)| fake(i, m, vec![])).collect();
        assert_eq!(rank_workflows(&ev), vec![2, 1, 0]);
    }

    #[test]
    fn fit_number_prefers_single_best_when_strictly_better() {
        let labels = vec![vec![0, 0, 1, 1]];
        let ev = vec![
            fake(0, 1.0, vec![vec![0.1, 0.2, 0.9, 0.8]]),
            fake(1, 0.3, vec![vec![0.9, 0.9, 0.1, 0.1]]),
            fake(2, 0.3, vec![vec![0.9, 0.9, 0.1, 0.1]]),
        ];
        assert_eq!(fit_number_size(&[0, 1, 2], &ev, &labels), 1);
    }

    #[test]
    fn fit_number_smallest_size_on_ties() {
        let labels = vec![vec![0, 1]];
        let ev: Vec<_> = (0..5).map(|i| fake(i, 1.0, vec![vec![0.2, 0.8]])).collect();
        assert_eq!(fit_number_size(&[0, 1, 2, 3, 4], &ev, &labels), 1);
    }

    #[test]
    fn forward_selection_bookkeeping() {
        let labels = vec![vec![0, 0, 1, 1], vec![0, 1, 1, 0]];
        let ev = vec![
            fake(0, 0.8, vec![vec![0.1, 0.6, 0.9, 0.8], vec![0.2, 0.7, 0.9, 0.4]]),
            fake(1, 0.7, vec![vec![0.3, 0.2, 0.7, 0.4], vec![0.1, 0.4, 0.8, 0.3]]),
            fake(2, FAILED_SCORE, vec![]),
        ];
        let cfg = ForwardSelectionConfig {
            n_bags: 4,
            bag_fraction: 0.5,
            max_rounds: 7,
        };
        let counts = forward_selection_counts(&[0, 1, 2], &ev, &labels, &cfg, 9);
        assert_eq!(counts.values().sum::<usize>(), 28);
        assert!(!counts.contains_key(&2));

        let single = vec![fake(0, 0.5, vec![vec![0.4, 0.6]])];
        let counts = forward_selection_counts(&[0], &single, &[vec![0, 1]], &cfg, 1);
        assert_eq!(counts.into_iter().collect::<Vec<_>>(), vec![(0, 28)]);
    }

    #[test]
    fn validation_score_of_mean_posteriors() {
        let labels = vec![vec![0, 1]];
        let ev = vec![fake(0, 0.0, vec![vec![0.8, 0.2]]), fake(1, 0.0, vec![vec![0.0, 1.0]])];
        // Averages are (0.4, 0.6): both correct.
        assert_eq!(validation_score(&[(0, 1.0), (1, 1.0)], &ev, &labels), 1.0);
        assert_eq!(validation_score(&[(0, 1.0)], &ev, &labels), 0.0);
    }

    #[test]
    fn config_validation() {
        let mut c = OptimizerConfig::default();
        assert!(c.validate().is_ok());
        c.n_ensemble = 2000;
        assert!(c.validate().is_err());
    }
}
