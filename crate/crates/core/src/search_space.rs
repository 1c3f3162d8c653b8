//! Joint hyperparameter space over complete workflows and random sampling.
//!
//! The space has ten steps in a fixed order: group-wise selection,
//! imputation, variance threshold, robust scaling, RELIEF, model-based
//! selection, PCA, univariate testing, resampling and classification.
//! Optional steps carry an activator (Bernoulli); steps with several
//! algorithms carry a selector (categorical or discrete uniform).
//!
//! A space serializes to TOML so that users can restrict or extend it:
//!
//! ```toml
//! resampling_enabled = true
//! [relief]
//! activator = { kind = "bernoulli", p = 0.2 }
//! n_neighbors = { kind = "uniform_discrete", min = 2, max = 6 }
//! ```

use rand::Rng as _;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{
    AdaBoostParams, BoostParams, ClassifierConfig, ClassifierKind, ForestParams, LdaParams,
    LdaSolver, LogisticParams, LrSolver, NbParams, Penalty, QdaParams, SvmKernel, SvmParams,
};
use crate::dataset::MAX_GROUPS;
use crate::preprocess::{ImputationMethod, PcaVariant, SelectionModel};
use crate::resampling::{ResampleMethod, ResamplePlan, SmoteKind, Strategy};
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Error, PartialEq)]
pub enum SpaceError {
    #[error("{field}: expected a {expected} distribution")]
    WrongKind { field: String, expected: &'static str },
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
    #[error("{field}: unknown option '{option}'")]
    UnknownOption { field: String, option: String },
    #[error("cannot parse search space: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Bernoulli { p: f64 },
    Categorical { options: Vec<String> },
    Uniform { min: f64, max: f64 },
    UniformDiscrete { min: i64, max: i64 },
    LogUniform { min: f64, max: f64 },
}

impl Distribution {
    pub fn bernoulli(p: f64) -> Self {
        Self::Bernoulli { p }
    }

    pub fn categorical(options: &[&str]) -> Self {
        Self::Categorical {
            options: options.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn uniform(min: f64, max: f64) -> Self {
        Self::Uniform { min, max }
    }

    pub fn discrete(min: i64, max: i64) -> Self {
        Self::UniformDiscrete { min, max }
    }

    pub fn log_uniform(min: f64, max: f64) -> Self {
        Self::LogUniform { min, max }
    }

    fn validate(&self, field: &str) -> Result<(), SpaceError> {
        let bad = |m: &str| {
            Err(SpaceError::Invalid {
                field: field.to_string(),
                message: m.to_string(),
            })
        };
        match *self {
            Self::Bernoulli { p } if !(0.0..=1.0).contains(&p) => bad("p outside [0, 1]"),
            Self::Categorical { ref options } if options.is_empty() => bad("no options"),
            Self::Uniform { min, max } if !(min <= max) || !min.is_finite() || !max.is_finite() => {
                bad("need finite min <= max")
            }
            Self::UniformDiscrete { min, max } if min > max => bad("need min <= max"),
            Self::LogUniform { min, max } if !(min > 0.0 && min <= max && max.is_finite()) => {
                bad("need 0 < min <= max")
            }
            _ => Ok(()),
        }
    }

    fn sample_bool(&self, rng: &mut Rng) -> bool {
        match *self {
            Self::Bernoulli { p } => rng.random::<f64>() < p,
            _ => unreachable!("validated as bernoulli"),
        }
    }

    fn sample_real(&self, rng: &mut Rng) -> f64 {
        match *self {
            Self::Uniform { min, max } => {
                let u: f64 = rng.random();
                min + (max - min) * u
            }
            Self::LogUniform { min, max } => {
                let (lo, hi) = (min.log10(), max.log10());
                let u: f64 = rng.random();
                10f64.powf(lo + (hi - lo) * u).clamp(min, max)
            }
            _ => unreachable!("validated as real"),
        }
    }

    fn sample_int(&self, rng: &mut Rng) -> i64 {
        match *self {
            Self::UniformDiscrete { min, max } => rng.random_range(min..=max),
            _ => unreachable!("validated as discrete"),
        }
    }

    fn sample_option<T: DeserializeOwned>(&self, rng: &mut Rng) -> T {
        match self {
            Self::Categorical { options } => {
                let i = rng.random_range(0..options.len());
                parse_option(&options[i]).expect("validated option")
            }
            _ => unreachable!("validated as categorical"),
        }
    }

    /// Whether `v` lies in the support of this distribution.
    pub fn contains_real(&self, v: f64) -> bool {
        match *self {
            Self::Uniform { min, max } | Self::LogUniform { min, max } => v >= min && v <= max,
            Self::UniformDiscrete { min, max } => {
                v.fract() == 0.0 && v >= min as f64 && v <= max as f64
            }
            _ => false,
        }
    }
}

fn parse_option<T: DeserializeOwned>(s: &str) -> Option<T> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).ok()
}

fn expect_bool(field: &str, d: &Distribution) -> Result<(), SpaceError> {
    d.validate(field)?;
    match d {
        Distribution::Bernoulli { .. } => Ok(()),
        _ => Err(SpaceError::WrongKind {
            field: field.into(),
            expected: "bernoulli",
        }),
    }
}

fn expect_real(field: &str, d: &Distribution, lo: f64, hi: f64) -> Result<(), SpaceError> {
    d.validate(field)?;
    match *d {
        Distribution::Uniform { min, max } | Distribution::LogUniform { min, max } => {
            if min < lo || max > hi {
                return Err(SpaceError::Invalid {
                    field: field.into(),
                    message: format!("range must lie within [{lo}, {hi}]"),
                });
            }
            Ok(())
        }
        _ => Err(SpaceError::WrongKind {
            field: field.into(),
            expected: "uniform or log_uniform",
        }),
    }
}

fn expect_int(field: &str, d: &Distribution, lo: i64) -> Result<(), SpaceError> {
    d.validate(field)?;
    match *d {
        Distribution::UniformDiscrete { min, .. } if min >= lo => Ok(()),
        Distribution::UniformDiscrete { .. } => Err(SpaceError::Invalid {
            field: field.into(),
            message: format!("minimum must be at least {lo}"),
        }),
        _ => Err(SpaceError::WrongKind {
            field: field.into(),
            expected: "uniform_discrete",
        }),
    }
}

fn expect_choice<T: DeserializeOwned>(field: &str, d: &Distribution) -> Result<(), SpaceError> {
    d.validate(field)?;
    match d {
        Distribution::Categorical { options } => {
            for o in options {
                if parse_option::<T>(o).is_none() {
                    return Err(SpaceError::UnknownOption {
                        field: field.into(),
                        option: o.clone(),
                    });
                }
            }
            Ok(())
        }
        _ => Err(SpaceError::WrongKind {
            field: field.into(),
            expected: "categorical",
        }),
    }
}

/// Integer selector over a named list of algorithms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selector {
    pub distribution: Distribution,
    pub options: Vec<String>,
}

impl Selector {
    fn validate<T: DeserializeOwned>(&self, field: &str) -> Result<(), SpaceError> {
        expect_int(field, &self.distribution, 1)?;
        if let Distribution::UniformDiscrete { min, max } = self.distribution {
            if (max - min + 1) as usize != self.options.len() || min != 1 {
                return Err(SpaceError::Invalid {
                    field: field.into(),
                    message: format!(
                        "selector range [{min}, {max}] must be [1, {}]",
                        self.options.len()
                    ),
                });
            }
        }
        for o in &self.options {
            if parse_option::<T>(o).is_none() {
                return Err(SpaceError::UnknownOption {
                    field: field.into(),
                    option: o.clone(),
                });
            }
        }
        Ok(())
    }

    fn sample<T: DeserializeOwned>(&self, rng: &mut Rng) -> T {
        let i = self.distribution.sample_int(rng) as usize - 1;
        parse_option(&self.options[i]).expect("validated option")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSelectionSpace {
    pub activator: Distribution,
    /// Applied independently to each of the group slots.
    pub group_activator: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationSpace {
    pub selector: Distribution,
    pub knn_neighbors: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceThresholdSpace {
    pub activator: Distribution,
}

/// Robust z-scoring has no hyperparameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScalingSpace {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliefSpace {
    pub activator: Distribution,
    pub n_neighbors: Distribution,
    pub sample_size: Distribution,
    pub distance_p: Distribution,
    pub n_features: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectFromModelSpace {
    pub activator: Distribution,
    pub model_type: Distribution,
    pub lasso_alpha: Distribution,
    pub rf_n_trees: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSpace {
    pub activator: Distribution,
    pub variant: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateSpace {
    pub activator: Distribution,
    pub threshold: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplingSpace {
    pub activator: Distribution,
    pub selector: Selector,
    pub random_under_strategy: Distribution,
    pub random_over_strategy: Distribution,
    pub near_miss_strategy: Distribution,
    pub ncr_strategy: Distribution,
    pub ncr_n_neighbors: Distribution,
    pub ncr_cleaning_threshold: Distribution,
    pub smote_kind: Distribution,
    pub smote_strategy: Distribution,
    pub smote_n_neighbors: Distribution,
    pub adasyn_strategy: Distribution,
    pub adasyn_n_neighbors: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmSpace {
    pub kernel: Distribution,
    pub regularization: Distribution,
    pub degree: Distribution,
    pub homogeneity: Distribution,
    pub rbf_gamma: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestSpace {
    pub n_trees: Distribution,
    pub min_samples_split: Distribution,
    pub max_depth: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticSpace {
    pub regularization: Distribution,
    pub solver: Distribution,
    pub penalty: Distribution,
    pub l1_ratio: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaSpace {
    pub solver: Distribution,
    pub shrinkage: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularizationSpace {
    pub regularization: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoostSpace {
    pub n_estimators: Distribution,
    pub learning_rate: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostSpace {
    pub n_rounds: Distribution,
    pub max_depth: Distribution,
    pub learning_rate: Distribution,
    pub gamma: Distribution,
    pub min_child_weight: Distribution,
    pub subsample: Distribution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSpace {
    pub selector: Selector,
    pub svm: SvmSpace,
    pub random_forest: ForestSpace,
    pub logistic_regression: LogisticSpace,
    pub lda: LdaSpace,
    pub qda: RegularizationSpace,
    pub gaussian_nb: RegularizationSpace,
    pub adaboost: AdaBoostSpace,
    pub xgboost: BoostSpace,
}

/// The joint space, one field per workflow step in execution order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub resampling_enabled: bool,
    pub group_selection: GroupSelectionSpace,
    pub imputation: ImputationSpace,
    pub variance_threshold: VarianceThresholdSpace,
    #[serde(default)]
    pub scaling: ScalingSpace,
    pub relief: ReliefSpace,
    pub select_from_model: SelectFromModelSpace,
    pub pca: PcaSpace,
    pub univariate: UnivariateSpace,
    pub resampling: ResamplingSpace,
    pub classification: ClassificationSpace,
}

/// Step names in execution order.
pub const STEPS: [(&str, &str); 10] = [
    ("feature_selection", "group_wise_selection"),
    ("feature_imputation", "imputation"),
    ("feature_selection", "variance_threshold"),
    ("feature_scaling", "robust_z_scoring"),
    ("feature_selection", "relief"),
    ("feature_selection", "select_from_model"),
    ("dimensionality_reduction", "pca"),
    ("feature_selection", "univariate_testing"),
    ("resampling", "resampling"),
    ("classification", "classification"),
];

const UNDER_STRATEGIES: [&str; 4] = ["not_minority", "majority", "not_majority", "all"];
const OVER_STRATEGIES: [&str; 4] = ["minority", "not_minority", "not_majority", "all"];

/// The full default space. Resampling is switched off entirely when
/// `resampling_enabled` is false.
pub fn default_space(resampling_enabled: bool) -> SearchSpace {
    use Distribution as D;
    SearchSpace {
        resampling_enabled,
        group_selection: GroupSelectionSpace {
            activator: D::bernoulli(1.0),
            group_activator: D::bernoulli(0.5),
        },
        imputation: ImputationSpace {
            selector: D::categorical(&["mean", "median", "mode", "constant_zero", "knn"]),
            knn_neighbors: D::discrete(5, 10),
        },
        variance_threshold: VarianceThresholdSpace {
            activator: D::bernoulli(1.0),
        },
        scaling: ScalingSpace {},
        relief: ReliefSpace {
            activator: D::bernoulli(0.2),
            n_neighbors: D::discrete(2, 6),
            sample_size: D::uniform(0.75, 0.95),
            distance_p: D::discrete(1, 4),
            n_features: D::discrete(10, 50),
        },
        select_from_model: SelectFromModelSpace {
            activator: D::bernoulli(0.2),
            model_type: D::categorical(&["lasso", "logistic_regression", "random_forest"]),
            lasso_alpha: D::uniform(0.1, 1.5),
            rf_n_trees: D::discrete(10, 100),
        },
        pca: PcaSpace {
            activator: D::bernoulli(0.2),
            variant: D::categorical(&["var95", "n10", "n50", "n100"]),
        },
        univariate: UnivariateSpace {
            activator: D::bernoulli(0.2),
            threshold: D::log_uniform(1e-3, 10f64.powf(-2.5)),
        },
        resampling: ResamplingSpace {
            activator: D::bernoulli(if resampling_enabled { 0.2 } else { 0.0 }),
            selector: Selector {
                distribution: D::discrete(1, 6),
                options: [
                    "random_under",
                    "random_over",
                    "near_miss",
                    "neighborhood_cleaning",
                    "smote",
                    "adasyn",
                ]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            },
            random_under_strategy: D::categorical(&UNDER_STRATEGIES),
            random_over_strategy: D::categorical(&OVER_STRATEGIES),
            near_miss_strategy: D::categorical(&UNDER_STRATEGIES),
            ncr_strategy: D::categorical(&UNDER_STRATEGIES),
            ncr_n_neighbors: D::discrete(3, 15),
            // Printed upper bound 75 read as 0.75.
            ncr_cleaning_threshold: D::uniform(0.25, 0.75),
            smote_kind: D::categorical(&["regular", "borderline", "tomek", "enn"]),
            smote_strategy: D::categorical(&OVER_STRATEGIES),
            smote_n_neighbors: D::discrete(3, 15),
            adasyn_strategy: D::categorical(&OVER_STRATEGIES),
            adasyn_n_neighbors: D::discrete(3, 15),
        },
        classification: ClassificationSpace {
            selector: Selector {
                distribution: D::discrete(1, 8),
                options: [
                    "svm",
                    "random_forest",
                    "logistic_regression",
                    "lda",
                    "qda",
                    "gaussian_nb",
                    "adaboost",
                    "xgboost",
                ]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            },
            svm: SvmSpace {
                kernel: D::categorical(&["linear", "poly", "rbf"]),
                regularization: D::log_uniform(1.0, 1e6),
                degree: D::discrete(1, 7),
                homogeneity: D::uniform(0.0, 1.0),
                rbf_gamma: D::log_uniform(1e-5, 1e5),
            },
            random_forest: ForestSpace {
                n_trees: D::discrete(10, 100),
                min_samples_split: D::discrete(2, 5),
                max_depth: D::discrete(5, 10),
            },
            logistic_regression: LogisticSpace {
                regularization: D::uniform(0.01, 1.0),
                solver: D::categorical(&["fast", "thorough"]),
                penalty: D::categorical(&["l1", "l2", "elasticnet"]),
                l1_ratio: D::uniform(0.0, 1.0),
            },
            lda: LdaSpace {
                solver: D::categorical(&["svd", "lsqr", "eigen"]),
                shrinkage: D::log_uniform(1e-5, 1e5),
            },
            qda: RegularizationSpace {
                regularization: D::log_uniform(1e-5, 1e5),
            },
            gaussian_nb: RegularizationSpace {
                regularization: D::uniform(0.0, 1.0),
            },
            adaboost: AdaBoostSpace {
                n_estimators: D::discrete(10, 100),
                learning_rate: D::log_uniform(0.01, 1.0),
            },
            xgboost: BoostSpace {
                n_rounds: D::discrete(10, 100),
                max_depth: D::discrete(3, 15),
                learning_rate: D::log_uniform(0.01, 1.0),
                gamma: D::uniform(0.01, 10.0),
                min_child_weight: D::discrete(1, 7),
                subsample: D::uniform(0.3, 1.0),
            },
        },
    }
}

/// Restricted space: LASSO selection feeding logistic regression.
///
/// Imputation, variance threshold and scaling stay as in the default space;
/// every feature group is kept and all other optional steps are off.
pub fn baseline_space() -> SearchSpace {
    use Distribution as D;
    let mut s = default_space(false);
    s.group_selection.group_activator = D::bernoulli(1.0);
    s.relief.activator = D::bernoulli(0.0);
    s.select_from_model.activator = D::bernoulli(1.0);
    s.select_from_model.model_type = D::categorical(&["lasso"]);
    s.pca.activator = D::bernoulli(0.0);
    s.univariate.activator = D::bernoulli(0.0);
    s.resampling.activator = D::bernoulli(0.0);
    s.classification.selector = Selector {
        distribution: D::discrete(1, 1),
        options: vec!["logistic_regression".to_string()],
    };
    s
}

impl SearchSpace {
    /// The space with the resampling step switched on or off. Switching off
    /// zeroes the activator; switching on keeps the configured activator.
    pub fn with_resampling(&self, enabled: bool) -> SearchSpace {
        let mut s = self.clone();
        s.resampling_enabled = enabled;
        if !enabled {
            s.resampling.activator = Distribution::bernoulli(0.0);
        }
        s
    }

    /// Checks every distribution against the kind and range its step expects.
    pub fn validate(&self) -> Result<(), SpaceError> {
        let g = &self.group_selection;
        expect_bool("group_selection.activator", &g.activator)?;
        expect_bool("group_selection.group_activator", &g.group_activator)?;
        let i = &self.imputation;
        expect_choice::<ImputationMethod>("imputation.selector", &i.selector)?;
        expect_int("imputation.knn_neighbors", &i.knn_neighbors, 1)?;
        expect_bool("variance_threshold.activator", &self.variance_threshold.activator)?;
        let r = &self.relief;
        expect_bool("relief.activator", &r.activator)?;
        expect_int("relief.n_neighbors", &r.n_neighbors, 1)?;
        expect_real("relief.sample_size", &r.sample_size, f64::MIN_POSITIVE, 1.0)?;
        expect_int("relief.distance_p", &r.distance_p, 1)?;
        expect_int("relief.n_features", &r.n_features, 1)?;
        let m = &self.select_from_model;
        expect_bool("select_from_model.activator", &m.activator)?;
        expect_choice::<SelectionModel>("select_from_model.model_type", &m.model_type)?;
        expect_real("select_from_model.lasso_alpha", &m.lasso_alpha, 0.0, f64::MAX)?;
        expect_int("select_from_model.rf_n_trees", &m.rf_n_trees, 1)?;
        expect_bool("pca.activator", &self.pca.activator)?;
        expect_choice::<PcaVariant>("pca.variant", &self.pca.variant)?;
        expect_bool("univariate.activator", &self.univariate.activator)?;
        expect_real("univariate.threshold", &self.univariate.threshold, 0.0, 1.0)?;

        let s = &self.resampling;
        expect_bool("resampling.activator", &s.activator)?;
        if !self.resampling_enabled {
            if let Distribution::Bernoulli { p } = s.activator {
                if p != 0.0 {
                    return Err(SpaceError::Invalid {
                        field: "resampling.activator".into(),
                        message: "must be bernoulli(0) when resampling is disabled".into(),
                    });
                }
            }
        }
        s.selector.validate::<ResampleMethod>("resampling.selector")?;
        for (field, d, under) in [
            ("resampling.random_under_strategy", &s.random_under_strategy, true),
            ("resampling.random_over_strategy", &s.random_over_strategy, false),
            ("resampling.near_miss_strategy", &s.near_miss_strategy, true),
            ("resampling.ncr_strategy", &s.ncr_strategy, true),
            ("resampling.smote_strategy", &s.smote_strategy, false),
            ("resampling.adasyn_strategy", &s.adasyn_strategy, false),
        ] {
            expect_choice::<Strategy>(field, d)?;
            if let Distribution::Categorical { options } = d {
                let forbidden = if under { "minority" } else { "majority" };
                if options.iter().any(|o| o == forbidden) {
                    return Err(SpaceError::Invalid {
                        field: field.into(),
                        message: format!("strategy '{forbidden}' is not valid for this method"),
                    });
                }
            }
        }
        expect_int("resampling.ncr_n_neighbors", &s.ncr_n_neighbors, 1)?;
        expect_real("resampling.ncr_cleaning_threshold", &s.ncr_cleaning_threshold, 0.0, f64::MAX)?;
        expect_choice::<SmoteKind>("resampling.smote_kind", &s.smote_kind)?;
        expect_int("resampling.smote_n_neighbors", &s.smote_n_neighbors, 1)?;
        expect_int("resampling.adasyn_n_neighbors", &s.adasyn_n_neighbors, 1)?;

        let c = &self.classification;
        c.selector.validate::<ClassifierKind>("classification.selector")?;
        expect_choice::<SvmKernel>("svm.kernel", &c.svm.kernel)?;
        expect_real("svm.regularization", &c.svm.regularization, f64::MIN_POSITIVE, f64::MAX)?;
        expect_int("svm.degree", &c.svm.degree, 1)?;
        expect_real("svm.homogeneity", &c.svm.homogeneity, 0.0, f64::MAX)?;
        expect_real("svm.rbf_gamma", &c.svm.rbf_gamma, f64::MIN_POSITIVE, f64::MAX)?;
        expect_int("random_forest.n_trees", &c.random_forest.n_trees, 1)?;
        expect_int("random_forest.min_samples_split", &c.random_forest.min_samples_split, 2)?;
        expect_int("random_forest.max_depth", &c.random_forest.max_depth, 1)?;
        let lr = &c.logistic_regression;
        expect_real("logistic_regression.regularization", &lr.regularization, f64::MIN_POSITIVE, f64::MAX)?;
        expect_choice::<LrSolver>("logistic_regression.solver", &lr.solver)?;
        expect_choice::<Penalty>("logistic_regression.penalty", &lr.penalty)?;
        expect_real("logistic_regression.l1_ratio", &lr.l1_ratio, 0.0, 1.0)?;
        expect_choice::<LdaSolver>("lda.solver", &c.lda.solver)?;
        expect_real("lda.shrinkage", &c.lda.shrinkage, 0.0, f64::MAX)?;
        expect_real("qda.regularization", &c.qda.regularization, 0.0, f64::MAX)?;
        expect_real("gaussian_nb.regularization", &c.gaussian_nb.regularization, 0.0, f64::MAX)?;
        expect_int("adaboost.n_estimators", &c.adaboost.n_estimators, 1)?;
        expect_real("adaboost.learning_rate", &c.adaboost.learning_rate, f64::MIN_POSITIVE, f64::MAX)?;
        let x = &c.xgboost;
        expect_int("xgboost.n_rounds", &x.n_rounds, 1)?;
        expect_int("xgboost.max_depth", &x.max_depth, 1)?;
        expect_real("xgboost.learning_rate", &x.learning_rate, f64::MIN_POSITIVE, f64::MAX)?;
        expect_real("xgboost.gamma", &x.gamma, 0.0, f64::MAX)?;
        expect_int("xgboost.min_child_weight", &x.min_child_weight, 0)?;
        expect_real("xgboost.subsample", &x.subsample, f64::MIN_POSITIVE, 1.0)?;
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("search space serializes")
    }

    pub fn from_toml_str(s: &str) -> Result<Self, SpaceError> {
        let space: Self = toml::from_str(s).map_err(|e| SpaceError::Parse(e.to_string()))?;
        space.validate()?;
        Ok(space)
    }

    /// Draws one workflow. Every hyperparameter is drawn, active or not, in a
    /// fixed order, so a seed maps to exactly one configuration.
    pub fn sample(&self, seed: u64) -> WorkflowConfig {
        let mut rng = rng_from_seed(seed);
        let rng = &mut rng;
        let g = &self.group_selection;
        let group_selection = GroupSelectionConfig {
            enabled: g.activator.sample_bool(rng),
            groups: (0..MAX_GROUPS).map(|_| g.group_activator.sample_bool(rng)).collect(),
        };
        let imputation = ImputationConfig {
            method: self.imputation.selector.sample_option(rng),
            knn_neighbors: self.imputation.knn_neighbors.sample_int(rng) as usize,
        };
        let variance_threshold = self.variance_threshold.activator.sample_bool(rng);
        let r = &self.relief;
        let relief = ReliefConfig {
            enabled: r.activator.sample_bool(rng),
            n_neighbors: r.n_neighbors.sample_int(rng) as usize,
            sample_fraction: r.sample_size.sample_real(rng),
            distance_p: r.distance_p.sample_int(rng) as u32,
            n_features: r.n_features.sample_int(rng) as usize,
        };
        let m = &self.select_from_model;
        let select_from_model = SelectFromModelConfig {
            enabled: m.activator.sample_bool(rng),
            model: m.model_type.sample_option(rng),
            lasso_alpha: m.lasso_alpha.sample_real(rng),
            rf_n_trees: m.rf_n_trees.sample_int(rng) as usize,
        };
        let pca = PcaConfig {
            enabled: self.pca.activator.sample_bool(rng),
            variant: self.pca.variant.sample_option(rng),
        };
        let univariate = UnivariateConfig {
            enabled: self.univariate.activator.sample_bool(rng),
            p_threshold: self.univariate.threshold.sample_real(rng),
        };
        let s = &self.resampling;
        let resampling = ResamplingConfig {
            enabled: s.activator.sample_bool(rng) && self.resampling_enabled,
            method: s.selector.sample(rng),
            random_under_strategy: s.random_under_strategy.sample_option(rng),
            random_over_strategy: s.random_over_strategy.sample_option(rng),
            near_miss_strategy: s.near_miss_strategy.sample_option(rng),
            ncr_strategy: s.ncr_strategy.sample_option(rng),
            ncr_n_neighbors: s.ncr_n_neighbors.sample_int(rng) as usize,
            ncr_cleaning_threshold: s.ncr_cleaning_threshold.sample_real(rng),
            smote_kind: s.smote_kind.sample_option(rng),
            smote_strategy: s.smote_strategy.sample_option(rng),
            smote_n_neighbors: s.smote_n_neighbors.sample_int(rng) as usize,
            adasyn_strategy: s.adasyn_strategy.sample_option(rng),
            adasyn_n_neighbors: s.adasyn_n_neighbors.sample_int(rng) as usize,
        };
        let c = &self.classification;
        let choice: ClassifierKind = c.selector.sample(rng);
        let svm = SvmParams {
            kernel: c.svm.kernel.sample_option(rng),
            c: c.svm.regularization.sample_real(rng),
            degree: c.svm.degree.sample_int(rng) as u32,
            coef0: c.svm.homogeneity.sample_real(rng),
            gamma: c.svm.rbf_gamma.sample_real(rng),
        };
        let random_forest = ForestParams {
            n_trees: c.random_forest.n_trees.sample_int(rng) as usize,
            min_samples_split: c.random_forest.min_samples_split.sample_int(rng) as usize,
            max_depth: Some(c.random_forest.max_depth.sample_int(rng) as usize),
        };
        let lr = &c.logistic_regression;
        let logistic_regression = LogisticParams {
            c: lr.regularization.sample_real(rng),
            solver: lr.solver.sample_option(rng),
            penalty: lr.penalty.sample_option(rng),
            l1_ratio: lr.l1_ratio.sample_real(rng),
        };
        let lda = LdaParams {
            solver: c.lda.solver.sample_option(rng),
            shrinkage: c.lda.shrinkage.sample_real(rng),
        };
        let qda = QdaParams {
            regularization: c.qda.regularization.sample_real(rng),
        };
        let gaussian_nb = NbParams {
            regularization: c.gaussian_nb.regularization.sample_real(rng),
        };
        let adaboost = AdaBoostParams {
            n_estimators: c.adaboost.n_estimators.sample_int(rng) as usize,
            learning_rate: c.adaboost.learning_rate.sample_real(rng),
        };
        let x = &c.xgboost;
        let xgboost = BoostParams {
            n_rounds: x.n_rounds.sample_int(rng) as usize,
            max_depth: x.max_depth.sample_int(rng) as usize,
            learning_rate: x.learning_rate.sample_real(rng),
            gamma: x.gamma.sample_real(rng),
            min_child_weight: x.min_child_weight.sample_int(rng) as f64,
            subsample: x.subsample.sample_real(rng),
        };
        WorkflowConfig {
            group_selection,
            imputation,
            variance_threshold,
            relief,
            select_from_model,
            pca,
            univariate,
            resampling,
            classifier: ClassifierConfig {
                choice,
                svm,
                random_forest,
                logistic_regression,
                lda,
                qda,
                gaussian_nb,
                adaboost,
                xgboost,
                seed,
            },
            rng_seed: seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSelectionConfig {
    pub enabled: bool,
    pub groups: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationConfig {
    pub method: ImputationMethod,
    pub knn_neighbors: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliefConfig {
    pub enabled: bool,
    pub n_neighbors: usize,
    pub sample_fraction: f64,
    pub distance_p: u32,
    pub n_features: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectFromModelConfig {
    pub enabled: bool,
    pub model: SelectionModel,
    pub lasso_alpha: f64,
    pub rf_n_trees: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaConfig {
    pub enabled: bool,
    pub variant: PcaVariant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivariateConfig {
    pub enabled: bool,
    pub p_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplingConfig {
    pub enabled: bool,
    pub method: ResampleMethod,
    pub random_under_strategy: Strategy,
    pub random_over_strategy: Strategy,
    pub near_miss_strategy: Strategy,
    pub ncr_strategy: Strategy,
    pub ncr_n_neighbors: usize,
    pub ncr_cleaning_threshold: f64,
    pub smote_kind: SmoteKind,
    pub smote_strategy: Strategy,
    pub smote_n_neighbors: usize,
    pub adasyn_strategy: Strategy,
    pub adasyn_n_neighbors: usize,
}

impl ResamplingConfig {
    /// The concrete plan for the selected method, or `None` when inactive.
    pub fn plan(&self, seed: u64) -> Option<ResamplePlan> {
        if !self.enabled {
            return None;
        }
        let (strategy, n_neighbors) = match self.method {
            ResampleMethod::RandomUnder => (self.random_under_strategy, 0),
            ResampleMethod::RandomOver => (self.random_over_strategy, 0),
            ResampleMethod::NearMiss => (self.near_miss_strategy, 3),
            ResampleMethod::NeighborhoodCleaning => (self.ncr_strategy, self.ncr_n_neighbors),
            ResampleMethod::Smote => (self.smote_strategy, self.smote_n_neighbors),
            ResampleMethod::Adasyn => (self.adasyn_strategy, self.adasyn_n_neighbors),
        };
        Some(ResamplePlan {
            method: self.method,
            smote_kind: self.smote_kind,
            strategy,
            n_neighbors,
            cleaning_threshold: self.ncr_cleaning_threshold,
            seed,
        })
    }
}

/// One concrete point in the search space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkflowConfig {
    pub group_selection: GroupSelectionConfig,
    pub imputation: ImputationConfig,
    pub variance_threshold: bool,
    pub relief: ReliefConfig,
    pub select_from_model: SelectFromModelConfig,
    pub pca: PcaConfig,
    pub univariate: UnivariateConfig,
    pub resampling: ResamplingConfig,
    pub classifier: ClassifierConfig,
    pub rng_seed: u64,
}

impl WorkflowConfig {
    /// Short stable digest of the configuration, for logs.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..6])
    }
}
