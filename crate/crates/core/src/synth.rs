//! Synthetic binary datasets with a known amount of signal.
//!
//! Signal features are `N(-sep/2, 1)` for class 0 and `N(+sep/2, 1)` for
//! class 1, noise features are `N(0, 1)` for both. Features are tagged
//! round-robin with three groups.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::FeatureDataset;
use crate::matrix::Matrix;
use crate::rng::rng_from_seed;

pub const GROUPS: [&str; 3] = ["group_a", "group_b", "group_c"];

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic spec: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_samples: usize,
    pub n_signal: usize,
    pub n_noise: usize,
    /// Standardized mean difference between the classes on signal features.
    pub class_separation: f64,
    /// Fraction of samples in class 0.
    pub class_ratio: f64,
    /// Fraction of feature cells left empty.
    pub missing_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_samples: 100,
            n_signal: 5,
            n_noise: 45,
            class_separation: 2.0,
            class_ratio: 0.5,
            missing_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::Invalid(m.to_string()));
        if self.n_samples < 4 {
            return bad("n_samples must be at least 4");
        }
        if self.n_signal + self.n_noise == 0 {
            return bad("need at least one feature");
        }
        if !self.class_separation.is_finite() || self.class_separation < 0.0 {
            return bad("class_separation must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.class_ratio) {
            return bad("class_ratio must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.missing_fraction) {
            return bad("missing_fraction must lie in [0, 1]");
        }
        Ok(())
    }

    /// Class sizes; each class keeps at least two samples.
    pub fn class_sizes(&self) -> [usize; 2] {
        let n0 = ((self.class_ratio * self.n_samples as f64).round() as usize).clamp(2, self.n_samples - 2);
        [n0, self.n_samples - n0]
    }
}

pub fn generate(spec: &SynthSpec) -> Result<FeatureDataset, SynthError> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let n = spec.n_samples;
    let p = spec.n_signal + spec.n_noise;
    let [n0, _] = spec.class_sizes();
    let mut labels: Vec<u8> = (0..n).map(|i| u8::from(i >= n0)).collect();
    labels.shuffle(&mut rng);

    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let half = spec.class_separation / 2.0;
    let mut x = Matrix::zeros(n, p);
    for (i, &l) in labels.iter().enumerate() {
        let shift = if l == 1 { half } else { -half };
        for j in 0..p {
            let z = normal.sample(&mut rng);
            x.set(i, j, if j < spec.n_signal { z + shift } else { z });
        }
    }
    let n_missing = (spec.missing_fraction * (n * p) as f64).round() as usize;
    for cell in sample(&mut rng, n * p, n_missing).iter() {
        x.set(cell / p, cell % p, f64::NAN);
    }

    let names = (0..spec.n_signal)
        .map(|j| format!("signal_{j:03}"))
        .chain((0..spec.n_noise).map(|j| format!("noise_{j:03}")))
        .collect();
    let groups = (0..p).map(|j| GROUPS[j % GROUPS.len()].to_string()).collect();
    let ids = (0..n).map(|i| format!("s{}_{i:04}", spec.seed)).collect();
    FeatureDataset::new(ids, names, groups, x, labels, ["0".to_string(), "1".to_string()])
        .map_err(|e| SynthError::Invalid(e.to_string()))
}
