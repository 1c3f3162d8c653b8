//! Run configuration file.
//!
//! ```toml
//! [data]
//! label_column = "label"
//! groups = "groups.csv"
//!
//! [evaluation]
//! mode = "nested_cv"
//! k_test = 100
//! master_seed = 0
//!
//! [optimizer]
//! n_random_search = 1000
//! n_ensemble = 100
//! ensemble_method = "top_n"
//!
//! [space]          # optional, defaults to the full search space
//! ```
//!
//! Every field is optional and defaults to the engine defaults.

use std::path::{Path, PathBuf};

use cash_core::evaluation::{EvaluationConfig, EvaluationMode};
use cash_core::optimizer::OptimizerConfig;
use cash_core::search_space::SearchSpace;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub label_column: String,
    pub groups: Option<PathBuf>,
    pub missing_token: String,
    pub positive_class: Option<String>,
    pub metadata: Option<PathBuf>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            label_column: "label".to_string(),
            groups: None,
            missing_token: "nan".to_string(),
            positive_class: None,
            metadata: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationSection {
    pub mode: EvaluationMode,
    pub k_test: usize,
    pub test_fraction: f64,
    pub n_bootstrap: usize,
    pub master_seed: u64,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        let d = EvaluationConfig::default();
        Self {
            mode: d.mode,
            k_test: d.k_test,
            test_fraction: d.test_fraction,
            n_bootstrap: d.n_bootstrap,
            master_seed: d.master_seed,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub evaluation: EvaluationSection,
    pub optimizer: OptimizerConfig,
    pub space: Option<SearchSpace>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Parses TOML; errors name the offending line and field.
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e: toml::de::Error| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            match line {
                Some(l) => format!("line {l}: {}", e.message()),
                None => e.message().to_string(),
            }
        })
    }

    pub fn evaluation_config(&self) -> EvaluationConfig {
        let e = &self.evaluation;
        EvaluationConfig {
            mode: e.mode,
            k_test: e.k_test,
            test_fraction: e.test_fraction,
            n_bootstrap: e.n_bootstrap,
            master_seed: e.master_seed,
            optimizer: self.optimizer.clone(),
        }
    }
}
