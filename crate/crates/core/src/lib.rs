//! Random-search AutoML for binary classification on tabular feature data.
//!
//! The engine treats a complete classification workflow (feature selection,
//! imputation, scaling, dimensionality reduction, resampling and the
//! classifier) as one point in a joint hyperparameter space. Workflows are
//! sampled at random, scored on internal random-split validation, ranked, and
//! the best ones are refit and averaged into an ensemble. Performance is
//! estimated with random-split nested cross-validation (corrected resampled
//! t-test intervals) or a fixed train/test split with bootstrap intervals.
//!
//! Module map:
//!
//! * [`dataset`]: CSV loading, validation, stratified splitting.
//! * [`fingerprint`]: metadata rules that narrow the search space.
//! * [`search_space`]: hyperparameter distributions and workflow sampling.
//! * [`preprocess`]: fit/apply feature steps (selection, imputation, scaling, PCA).
//! * [`resampling`]: class-imbalance resamplers applied to training folds.
//! * [`classifiers`]: the eight binary classifiers.
//! * [`metrics`], [`stats`]: evaluation metrics, intervals and ROC bands.
//! * [`optimizer`]: random search, ranking and ensembling.
//! * [`evaluation`]: nested cross-validation and fixed-split evaluation.
//! * [`synth`]: synthetic datasets with controllable signal.

pub mod classifiers;
pub mod dataset;
pub mod evaluation;
pub mod fingerprint;
pub mod matrix;
pub mod metrics;
pub mod optimizer;
pub mod preprocess;
pub mod resampling;
pub mod rng;
pub mod search_space;
pub mod stats;
pub mod synth;

pub use dataset::{FeatureDataset, SplitPlan};
pub use evaluation::{EvaluationConfig, EvaluationMode, EvaluationReport};
pub use matrix::Matrix;
pub use optimizer::{Ensemble, EnsembleMethod, OptimizerConfig};
pub use search_space::{SearchSpace, WorkflowConfig};

/// Engine version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
