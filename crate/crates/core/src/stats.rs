//! Confidence intervals for resampled performance estimates and ROC bands.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::matrix::{mean, sample_variance};
use crate::metrics::RocPoint;

/// Two-sided normal quantile used by the bootstrap interval.
pub const Z_975: f64 = 1.96;
/// Points on the common false-positive-rate grid.
pub const ROC_GRID_POINTS: usize = 101;
pub const BAND_COVERAGE: f64 = 0.95;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("train and test sizes must be positive")]
    BadSizes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CiMethod {
    CorrectedResampledT,
    BootstrapNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: CiMethod,
}

impl ConfidenceInterval {
    /// Bounds clamped to [0, 1] for reporting.
    pub fn clamped(&self) -> Self {
        Self {
            lower: self.lower.clamp(0.0, 1.0),
            upper: self.upper.clamp(0.0, 1.0),
            ..*self
        }
    }

    pub fn half_width(&self) -> f64 {
        (self.upper - self.lower) / 2.0
    }
}

/// Quantile of Student's t distribution with `df` degrees of freedom.
pub fn t_quantile(df: usize, p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    StudentsT::new(0.0, 1.0, df as f64)
        .expect("df >= 1")
        .inverse_cdf(p)
}

/// Mean with the corrected resampled t interval for `k` random splits:
/// `t_{k-1, 0.975} * sqrt((1/k + n_test/n_train) * s^2)`.
pub fn corrected_resampled_t_ci(
    values: &[f64],
    n_train: usize,
    n_test: usize,
) -> Result<ConfidenceInterval, StatsError> {
    let k = values.len();
    if k < 2 {
        return Err(StatsError::TooFewValues { needed: 2, got: k });
    }
    if n_train == 0 || n_test == 0 {
        return Err(StatsError::BadSizes);
    }
    let m = mean(values);
    let s2 = sample_variance(values).max(0.0);
    let factor = 1.0 / k as f64 + n_test as f64 / n_train as f64;
    let half = t_quantile(k - 1, 0.975) * (factor * s2).sqrt();
    Ok(ConfidenceInterval {
        mean: m,
        lower: m - half,
        upper: m + half,
        method: CiMethod::CorrectedResampledT,
    })
}

/// `point +- 1.96 * sd(bootstrap)`, centred on the full-test-set estimate.
pub fn bootstrap_normal_ci(point: f64, bootstrap: &[f64]) -> Result<ConfidenceInterval, StatsError> {
    if bootstrap.len() < 2 {
        return Err(StatsError::TooFewValues {
            needed: 2,
            got: bootstrap.len(),
        });
    }
    let half = Z_975 * sample_variance(bootstrap).max(0.0).sqrt();
    Ok(ConfidenceInterval {
        mean: point,
        lower: point - half,
        upper: point + half,
        method: CiMethod::BootstrapNormal,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocBand {
    pub fpr: Vec<f64>,
    pub mean_tpr: Vec<f64>,
    /// `mean_tpr - half_width` clipped to [0, 1].
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub half_width: f64,
    /// Fraction of member curves lying inside the band.
    pub coverage: f64,
}

/// True-positive rate of a curve at `f`: the top of any vertical step at
/// `f`, otherwise linear interpolation between the neighbouring points.
pub fn tpr_at(curve: &[RocPoint], f: f64) -> f64 {
    let mut best: Option<f64> = None;
    for p in curve {
        if p.fpr == f {
            best = Some(best.map_or(p.tpr, |b: f64| b.max(p.tpr)));
        }
    }
    if let Some(t) = best {
        return t;
    }
    let mut before = None;
    let mut after = None;
    for p in curve {
        if p.fpr < f {
            before = Some(*p);
        } else if p.fpr > f && after.is_none() {
            after = Some(*p);
        }
    }
    match (before, after) {
        (Some(a), Some(b)) => a.tpr + (b.tpr - a.tpr) * (f - a.fpr) / (b.fpr - a.fpr),
        (Some(a), None) => a.tpr,
        (None, Some(b)) => b.tpr,
        (None, None) => 0.0,
    }
}

/// Vertically averaged ROC curve with the smallest fixed half-width that
/// contains at least 95% of the member curves.
pub fn roc_band(curves: &[Vec<RocPoint>]) -> Result<RocBand, StatsError> {
    let m = curves.len();
    if m < 2 {
        return Err(StatsError::TooFewValues { needed: 2, got: m });
    }
    let fpr: Vec<f64> = (0..ROC_GRID_POINTS)
        .map(|g| g as f64 / (ROC_GRID_POINTS - 1) as f64)
        .collect();
    let grid: Vec<Vec<f64>> = curves
        .iter()
        .map(|c| fpr.iter().map(|&f| tpr_at(c, f)).collect())
        .collect();
    let mean_tpr: Vec<f64> = (0..fpr.len())
        .map(|g| grid.iter().map(|c| c[g]).sum::<f64>() / m as f64)
        .collect();
    let mut dev: Vec<f64> = grid
        .iter()
        .map(|c| {
            c.iter()
                .zip(&mean_tpr)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    dev.sort_by(f64::total_cmp);
    let needed = ((BAND_COVERAGE * m as f64) - 1e-9).ceil() as usize;
    let half_width = dev[needed.max(1) - 1];
    let coverage = dev.iter().filter(|&&d| d <= half_width).count() as f64 / m as f64;
    Ok(RocBand {
        lower: mean_tpr.iter().map(|t| (t - half_width).clamp(0.0, 1.0)).collect(),
        upper: mean_tpr.iter().map(|t| (t + half_width).clamp(0.0, 1.0)).collect(),
        fpr,
        mean_tpr,
        half_width,
        coverage,
    })
}
