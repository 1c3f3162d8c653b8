//! Real AdaBoost (SAMME.R for two classes) over depth-1 stumps.
//!
//! Each stump outputs half the log-odds of its weighted leaf probability;
//! the ensemble score `F` is the learning-rate-scaled sum and the posterior
//! is `sigmoid(2 F)`.

use serde::{Deserialize, Serialize};

use super::AdaBoostParams;
use crate::matrix::{sigmoid, Matrix};

const CLIP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// Half log-odds on each side.
    pub left: f64,
    pub right: f64,
}

impl Stump {
    fn score(&self, row: &[f64]) -> f64 {
        if row[self.feature] <= self.threshold {
            self.left
        } else {
            self.right
        }
    }
}

fn half_log_odds(pos: f64, total: f64) -> f64 {
    let p = if total > 0.0 { pos / total } else { 0.5 };
    let p = p.clamp(CLIP, 1.0 - CLIP);
    0.5 * (p / (1.0 - p)).ln()
}

fn weighted_gini(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    total * 2.0 * p * (1.0 - p)
}

/// Stump minimizing weighted Gini impurity; constant when no split exists.
fn fit_stump(x: &Matrix, labels: &[u8], w: &[f64]) -> Stump {
    let total: f64 = w.iter().sum();
    let pos: f64 = w.iter().zip(labels).filter(|(_, &l)| l == 1).map(|(v, _)| v).sum();
    let mut best = (weighted_gini(pos, total) - 1e-12, None);
    let mut order: Vec<usize> = (0..labels.len()).collect();
    for f in 0..x.ncols() {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)));
        let (mut lw, mut lp) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            let r = order[k];
            lw += w[r];
            if labels[r] == 1 {
                lp += w[r];
            }
            let (a, b) = (x.get(r, f), x.get(order[k + 1], f));
            if a == b {
                continue;
            }
            let imp = weighted_gini(lp, lw) + weighted_gini(pos - lp, total - lw);
            if imp < best.0 {
                best = (imp, Some((f, (a + b) / 2.0, lp, lw)));
            }
        }
    }
    match best.1 {
        Some((feature, threshold, lp, lw)) => Stump {
            feature,
            threshold,
            left: half_log_odds(lp, lw),
            right: half_log_odds(pos - lp, total - lw),
        },
        None => {
            let v = half_log_odds(pos, total);
            Stump {
                feature: 0,
                threshold: f64::INFINITY,
                left: v,
                right: v,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaBoost {
    pub stumps: Vec<Stump>,
    pub learning_rate: f64,
    pub n_features: usize,
}

impl AdaBoost {
    pub fn fit(x: &Matrix, labels: &[u8], params: &AdaBoostParams) -> Self {
        let n = labels.len();
        let lr = params.learning_rate;
        let mut w = vec![1.0 / n as f64; n];
        let mut stumps = Vec::new();
        for _ in 0..params.n_estimators {
            let s = fit_stump(x, labels, &w);
            for i in 0..n {
                let y = if labels[i] == 1 { 1.0 } else { -1.0 };
                w[i] *= (-lr * y * s.score(x.row(i))).exp();
            }
            stumps.push(s);
            let total: f64 = w.iter().sum();
            if !total.is_finite() || total <= 0.0 {
                break;
            }
            w.iter_mut().for_each(|v| *v /= total);
        }
        Self {
            stumps,
            learning_rate: lr,
            n_features: x.ncols(),
        }
    }

    pub fn score(&self, row: &[f64]) -> f64 {
        self.learning_rate * self.stumps.iter().map(|s| s.score(row)).sum::<f64>()
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(2.0 * self.score(row))
    }
}
