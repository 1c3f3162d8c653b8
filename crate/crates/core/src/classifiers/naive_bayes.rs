//! Gaussian naive Bayes with variance smoothing.

use serde::{Deserialize, Serialize};

use super::NbParams;
use crate::matrix::{population_variance, sigmoid, Matrix};

/// Smallest smoothing, as a fraction of the largest feature variance, so
/// that features constant within a class stay usable.
const MIN_SMOOTHING: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub means: [Vec<f64>; 2],
    pub variances: [Vec<f64>; 2],
    pub log_priors: [f64; 2],
}

impl GaussianNb {
    /// Adds `regularization * max feature variance` to every class variance.
    pub fn fit(x: &Matrix, labels: &[u8], params: &NbParams) -> Self {
        let p = x.ncols();
        let max_var = (0..p)
            .map(|j| population_variance(&x.column(j)))
            .fold(0.0, f64::max);
        let eps = (params.regularization.max(MIN_SMOOTHING) * max_var).max(1e-12);
        let n = labels.len() as f64;
        let mut means = [Vec::new(), Vec::new()];
        let mut variances = [Vec::new(), Vec::new()];
        let mut log_priors = [0.0; 2];
        for c in 0..2u8 {
            let rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
            let sub = x.select_rows(&rows);
            for j in 0..p {
                let col = sub.column(j);
                means[c as usize].push(col.iter().sum::<f64>() / col.len() as f64);
                variances[c as usize].push(population_variance(&col) + eps);
            }
            log_priors[c as usize] = (rows.len() as f64 / n).ln();
        }
        Self {
            means,
            variances,
            log_priors,
        }
    }

    fn log_joint(&self, c: usize, row: &[f64]) -> f64 {
        let mut s = self.log_priors[c];
        for ((x, m), v) in row.iter().zip(&self.means[c]).zip(&self.variances[c]) {
            s -= 0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m) * (x - m) / v);
        }
        s
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.log_joint(1, row) - self.log_joint(0, row))
    }
}
