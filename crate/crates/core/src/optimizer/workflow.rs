//! One complete workflow: preprocessing, resampling and a classifier.

use serde::Serialize;
use thiserror::Error;

use crate::classifiers::{self, ClassifierError, FittedClassifier};
use crate::matrix::Matrix;
use crate::preprocess::{FittedPipeline, PreprocessError};
use crate::resampling::resample;
use crate::rng::{derive_seed, tags};
use crate::search_space::WorkflowConfig;

#[derive(Debug, Error, PartialEq)]
pub enum WorkflowError {
    #[error("preprocessing failed: {0}")]
    Preprocess(#[from] PreprocessError),
    #[error("classifier failed: {0}")]
    Classifier(#[from] ClassifierError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedWorkflow {
    pub config: WorkflowConfig,
    pub pipeline: FittedPipeline,
    pub classifier: FittedClassifier,
    /// Fallbacks and degenerate-input notes raised while fitting.
    pub notes: Vec<String>,
}

impl FittedWorkflow {
    /// Fits steps 1 to 10 on training data. All randomness derives from the
    /// configuration's own seed.
    pub fn fit(
        config: &WorkflowConfig,
        x: &Matrix,
        labels: &[u8],
        group_slots: &[usize],
    ) -> Result<Self, WorkflowError> {
        let seed = config.rng_seed;
        let (pipeline, xt) = FittedPipeline::fit(config, x, labels, group_slots, seed)?;
        let mut notes: Vec<String> = pipeline
            .fallbacks()
            .into_iter()
            .map(|s| format!("{s}: empty selection, fallback used"))
            .collect();
        let (xr, yr) = match config.resampling.plan(derive_seed(seed, &[tags::RESAMPLE])) {
            Some(plan) => {
                let r = resample(&xt, labels, &plan);
                notes.extend(r.note);
                (r.x, r.labels)
            }
            None => (xt, labels.to_vec()),
        };
        let mut ccfg = config.classifier.clone();
        ccfg.seed = derive_seed(seed, &[tags::CLASSIFIER]);
        let classifier = classifiers::fit(&ccfg, &xr, &yr)?;
        if !classifier.converged() {
            notes.push("classifier stopped at its iteration limit".to_string());
        }
        Ok(Self {
            config: config.clone(),
            pipeline,
            classifier,
            notes,
        })
    }

    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>, WorkflowError> {
        let xt = self.pipeline.apply(x)?;
        Ok(self.classifier.predict_proba(&xt)?)
    }
}
