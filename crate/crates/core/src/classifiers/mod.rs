//! Binary classifiers returning the posterior probability of class 1.

pub mod adaboost;
pub mod boosting;
pub mod discriminant;
pub mod forest;
pub mod logistic;
pub mod naive_bayes;
pub mod svm;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

#[derive(Debug, Error, PartialEq)]
pub enum ClassifierError {
    #[error("model expects {expected} features, input has {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("training data has no rows")]
    Empty,
    #[error("training data contains non-finite values")]
    NonFinite,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Svm,
    RandomForest,
    LogisticRegression,
    Lda,
    Qda,
    GaussianNb,
    #[serde(rename = "adaboost")]
    AdaBoost,
    #[serde(rename = "xgboost")]
    XgBoost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SvmKernel {
    Linear,
    Poly,
    Rbf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub kernel: SvmKernel,
    pub c: f64,
    pub degree: u32,
    /// Additive constant of the polynomial kernel.
    pub coef0: f64,
    /// RBF width.
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub min_samples_split: usize,
    pub max_depth: Option<usize>,
}

/// Both tags run the same proximal-gradient optimizer; they differ only in
/// the iteration budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSolver {
    Fast,
    Thorough,
}

impl LrSolver {
    pub fn max_iter(self) -> usize {
        match self {
            Self::Fast => 500,
            Self::Thorough => 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Penalty {
    L1,
    L2,
    Elasticnet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticParams {
    /// Inverse regularization strength.
    pub c: f64,
    pub solver: LrSolver,
    pub penalty: Penalty,
    /// Weight of the L1 term for elastic net.
    pub l1_ratio: f64,
}

/// Recorded for configuration fidelity; every tag uses the same solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LdaSolver {
    Svd,
    Lsqr,
    Eigen,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaParams {
    pub solver: LdaSolver,
    /// Clamped to [0, 1] when fitting.
    pub shrinkage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QdaParams {
    /// Clamped to [0, 1] when fitting.
    pub regularization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbParams {
    /// Variance smoothing as a fraction of the largest feature variance.
    pub regularization: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostParams {
    pub n_estimators: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_rounds: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    /// Minimum loss reduction for a split.
    pub gamma: f64,
    /// Minimum hessian sum in a child.
    pub min_child_weight: f64,
    pub subsample: f64,
}

/// Selected classifier plus settings for every choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierConfig {
    pub choice: ClassifierKind,
    pub svm: SvmParams,
    pub random_forest: ForestParams,
    pub logistic_regression: LogisticParams,
    pub lda: LdaParams,
    pub qda: QdaParams,
    pub gaussian_nb: NbParams,
    pub adaboost: AdaBoostParams,
    pub xgboost: BoostParams,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum FittedClassifier {
    Svm(svm::SvmModel),
    RandomForest(forest::RandomForest),
    LogisticRegression(logistic::LogisticRegression),
    Lda(discriminant::Lda),
    Qda(discriminant::Qda),
    GaussianNb(naive_bayes::GaussianNb),
    AdaBoost(adaboost::AdaBoost),
    XgBoost(boosting::GradientBoosting),
}

fn check_training(x: &Matrix, labels: &[u8]) -> Result<(), ClassifierError> {
    if x.nrows() == 0 || labels.len() != x.nrows() {
        return Err(ClassifierError::Empty);
    }
    if x.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(ClassifierError::NonFinite);
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(ClassifierError::SingleClass);
    }
    Ok(())
}

pub fn fit(cfg: &ClassifierConfig, x: &Matrix, labels: &[u8]) -> Result<FittedClassifier, ClassifierError> {
    check_training(x, labels)?;
    Ok(match cfg.choice {
        ClassifierKind::Svm => FittedClassifier::Svm(svm::SvmModel::fit(x, labels, &cfg.svm, cfg.seed)),
        ClassifierKind::RandomForest => FittedClassifier::RandomForest(forest::RandomForest::fit(
            x,
            labels,
            &cfg.random_forest,
            cfg.seed,
        )),
        ClassifierKind::LogisticRegression => FittedClassifier::LogisticRegression(
            logistic::LogisticRegression::fit(x, labels, &cfg.logistic_regression),
        ),
        ClassifierKind::Lda => FittedClassifier::Lda(discriminant::Lda::fit(x, labels, &cfg.lda)),
        ClassifierKind::Qda => FittedClassifier::Qda(discriminant::Qda::fit(x, labels, &cfg.qda)),
        ClassifierKind::GaussianNb => {
            FittedClassifier::GaussianNb(naive_bayes::GaussianNb::fit(x, labels, &cfg.gaussian_nb))
        }
        ClassifierKind::AdaBoost => {
            FittedClassifier::AdaBoost(adaboost::AdaBoost::fit(x, labels, &cfg.adaboost))
        }
        ClassifierKind::XgBoost => FittedClassifier::XgBoost(boosting::GradientBoosting::fit(
            x,
            labels,
            &cfg.xgboost,
            cfg.seed,
        )),
    })
}

impl FittedClassifier {
    pub fn kind(&self) -> ClassifierKind {
        match self {
            Self::Svm(_) => ClassifierKind::Svm,
            Self::RandomForest(_) => ClassifierKind::RandomForest,
            Self::LogisticRegression(_) => ClassifierKind::LogisticRegression,
            Self::Lda(_) => ClassifierKind::Lda,
            Self::Qda(_) => ClassifierKind::Qda,
            Self::GaussianNb(_) => ClassifierKind::GaussianNb,
            Self::AdaBoost(_) => ClassifierKind::AdaBoost,
            Self::XgBoost(_) => ClassifierKind::XgBoost,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            Self::Svm(m) => m.n_features(),
            Self::RandomForest(m) => m.n_features,
            Self::LogisticRegression(m) => m.coef.len(),
            Self::Lda(m) => m.weights.len(),
            Self::Qda(m) => m.n_features(),
            Self::GaussianNb(m) => m.means[0].len(),
            Self::AdaBoost(m) => m.n_features,
            Self::XgBoost(m) => m.n_features,
        }
    }

    /// False when an iterative solver stopped at its iteration cap.
    pub fn converged(&self) -> bool {
        match self {
            Self::Svm(m) => m.converged,
            Self::LogisticRegression(m) => m.converged,
            _ => true,
        }
    }

    fn proba_row(&self, row: &[f64]) -> f64 {
        match self {
            Self::Svm(m) => m.proba_row(row),
            Self::RandomForest(m) => m.proba_row(row),
            Self::LogisticRegression(m) => m.proba_row(row),
            Self::Lda(m) => m.proba_row(row),
            Self::Qda(m) => m.proba_row(row),
            Self::GaussianNb(m) => m.proba_row(row),
            Self::AdaBoost(m) => m.proba_row(row),
            Self::XgBoost(m) => m.proba_row(row),
        }
    }

    /// Posterior probability of class 1 for each row.
    pub fn predict_proba(&self, x: &Matrix) -> Result<Vec<f64>, ClassifierError> {
        if x.ncols() != self.n_features() {
            return Err(ClassifierError::DimensionMismatch {
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        Ok(x
            .rows_iter()
            .take(x.nrows())
            .map(|r| {
                let p = self.proba_row(r);
                if p.is_nan() {
                    0.5
                } else {
                    p.clamp(0.0, 1.0)
                }
            })
            .collect())
    }
}

/// Class-1 prior as log-odds, shared by several models.
pub(crate) fn prior_log_odds(labels: &[u8]) -> f64 {
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let neg = labels.len() as f64 - pos;
    (pos / neg).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn default_config(choice: ClassifierKind) -> ClassifierConfig {
        ClassifierConfig {
            choice,
            svm: SvmParams {
                kernel: SvmKernel::Rbf,
                c: 1.0,
                degree: 3,
                coef0: 0.0,
                gamma: 0.1,
            },
            random_forest: ForestParams {
                n_trees: 30,
                min_samples_split: 2,
                max_depth: Some(6),
            },
            logistic_regression: LogisticParams {
                c: 1.0,
                solver: LrSolver::Fast,
                penalty: Penalty::L2,
                l1_ratio: 0.5,
            },
            lda: LdaParams {
                solver: LdaSolver::Svd,
                shrinkage: 0.1,
            },
            qda: QdaParams { regularization: 0.1 },
            gaussian_nb: NbParams { regularization: 0.01 },
            adaboost: AdaBoostParams {
                n_estimators: 30,
                learning_rate: 0.5,
            },
            xgboost: BoostParams {
                n_rounds: 30,
                max_depth: 3,
                learning_rate: 0.3,
                gamma: 0.1,
                min_child_weight: 1.0,
                subsample: 0.8,
            },
            seed: 11,
        }
    }

    pub(crate) const ALL: [ClassifierKind; 8] = [
        ClassifierKind::Svm,
        ClassifierKind::RandomForest,
        ClassifierKind::LogisticRegression,
        ClassifierKind::Lda,
        ClassifierKind::Qda,
        ClassifierKind::GaussianNb,
        ClassifierKind::AdaBoost,
        ClassifierKind::XgBoost,
    ];

    /// Two clouds drawn from the same distribution, 40% class 1.
    fn no_signal() -> (Matrix, Vec<u8>) {
        use rand::Rng as _;
        let mut rng = crate::rng::rng_from_seed(2);
        let n = 200;
        let data: Vec<f64> = (0..n * 3).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let labels = (0..n).map(|i| u8::from(i % 5 < 2)).collect();
        (Matrix::from_vec(n, 3, data), labels)
    }

    #[test]
    fn no_signal_gives_prevalence() {
        let (x, y) = no_signal();
        for kind in ALL {
            let m = fit(&default_config(kind), &x, &y).unwrap();
            let p = m.predict_proba(&x).unwrap();
            let avg = p.iter().sum::<f64>() / p.len() as f64;
            assert!((avg - 0.4).abs() < 0.1, "{kind:?}: mean posterior {avg}");
        }
    }

    #[test]
    fn outputs_are_probabilities_and_row_independent() {
        let (x, y) = no_signal();
        let rev: Vec<usize> = (0..x.nrows()).rev().collect();
        let xr = x.select_rows(&rev);
        for kind in ALL {
            let m = fit(&default_config(kind), &x, &y).unwrap();
            let p = m.predict_proba(&x).unwrap();
            assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
            let mut pr = m.predict_proba(&xr).unwrap();
            pr.reverse();
            assert_eq!(p, pr, "{kind:?}");
            assert!(matches!(
                m.predict_proba(&Matrix::zeros(2, 5)),
                Err(ClassifierError::DimensionMismatch { .. })
            ));
        }
    }

    #[test]
    fn rejects_single_class() {
        let x = Matrix::zeros(4, 2);
        assert_eq!(
            fit(&default_config(ClassifierKind::Lda), &x, &[1, 1, 1, 1]).unwrap_err(),
            ClassifierError::SingleClass
        );
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let (x, y) = no_signal();
        for kind in ALL {
            let a = fit(&default_config(kind), &x, &y).unwrap().predict_proba(&x).unwrap();
            let b = fit(&default_config(kind), &x, &y).unwrap().predict_proba(&x).unwrap();
            assert_eq!(a, b);
        }
    }
}
