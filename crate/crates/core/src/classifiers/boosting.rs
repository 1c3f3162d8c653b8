//! Second-order gradient boosting of regression trees on logistic loss.
//!
//! Trees are grown by exact greedy search with L2 leaf regularization
//! `lambda = 1`, minimum split gain `gamma` and a minimum hessian sum per
//! child. Rows are subsampled without replacement each round. If a round
//! would raise the full training loss its step is halved until it does not
//! (and dropped after 30 halvings), so the training loss never increases.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::BoostParams;
use crate::matrix::{sigmoid, Matrix};
use crate::rng::{derive_seed, rng_from_seed};

const LAMBDA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RegNode {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegTree {
    pub nodes: Vec<RegNode>,
    /// Multiplier applied to every leaf value.
    pub scale: f64,
}

impl RegTree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                RegNode::Leaf { value } => return value * self.scale,
                RegNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

struct Grower<'a> {
    x: &'a Matrix,
    g: &'a [f64],
    h: &'a [f64],
    params: &'a BoostParams,
    nodes: Vec<RegNode>,
}

fn score(g: f64, h: f64) -> f64 {
    g * g / (h + LAMBDA)
}

impl Grower<'_> {
    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        let gs: f64 = rows.iter().map(|&r| self.g[r]).sum();
        let hs: f64 = rows.iter().map(|&r| self.h[r]).sum();
        self.nodes.push(RegNode::Leaf {
            value: -gs / (hs + LAMBDA) * self.params.learning_rate,
        });
        if depth >= self.params.max_depth || rows.len() < 2 {
            return id;
        }
        let mut best: Option<(f64, usize, f64)> = None;
        let mut order = rows.clone();
        for f in 0..self.x.ncols() {
            order.sort_by(|&a, &b| self.x.get(a, f).total_cmp(&self.x.get(b, f)));
            let (mut gl, mut hl) = (0.0, 0.0);
            for k in 0..order.len() - 1 {
                let r = order[k];
                gl += self.g[r];
                hl += self.h[r];
                let (a, b) = (self.x.get(r, f), self.x.get(order[k + 1], f));
                if a == b {
                    continue;
                }
                let (gr, hr) = (gs - gl, hs - hl);
                if hl < self.params.min_child_weight || hr < self.params.min_child_weight {
                    continue;
                }
                let gain = 0.5 * (score(gl, hl) + score(gr, hr) - score(gs, hs)) - self.params.gamma;
                if gain > 0.0 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, (a + b) / 2.0));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&i| self.x.get(i, feature) <= threshold);
        let left = self.grow(l, depth + 1);
        let right = self.grow(r, depth + 1);
        self.nodes[id] = RegNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Mean logistic loss of margins `f` against labels.
pub fn log_loss(f: &[f64], labels: &[u8]) -> f64 {
    f.iter()
        .zip(labels)
        .map(|(&z, &y)| {
            let l1p = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            l1p - y as f64 * z
        })
        .sum::<f64>()
        / f.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub base_margin: f64,
    pub trees: Vec<RegTree>,
    pub n_features: usize,
    /// Training loss before the first round and after each round.
    pub loss_history: Vec<f64>,
}

impl GradientBoosting {
    pub fn fit(x: &Matrix, labels: &[u8], params: &BoostParams, seed: u64) -> Self {
        let n = labels.len();
        let base_margin = super::prior_log_odds(labels);
        let mut f = vec![base_margin; n];
        let mut loss = log_loss(&f, labels);
        let mut loss_history = vec![loss];
        let mut trees = Vec::new();
        let m = ((params.subsample * n as f64).round() as usize).clamp(1, n);
        for round in 0..params.n_rounds {
            let g: Vec<f64> = f.iter().zip(labels).map(|(&z, &y)| sigmoid(z) - y as f64).collect();
            let h: Vec<f64> = f.iter().map(|&z| {
                let p = sigmoid(z);
                (p * (1.0 - p)).max(1e-16)
            }).collect();
            let mut rng = rng_from_seed(derive_seed(seed, &[round as u64]));
            let mut rows = sample(&mut rng, n, m).into_vec();
            rows.sort_unstable();
            let mut gr = Grower {
                x,
                g: &g,
                h: &h,
                params,
                nodes: Vec::new(),
            };
            gr.grow(rows, 0);
            let mut tree = RegTree {
                nodes: gr.nodes,
                scale: 1.0,
            };
            let step: Vec<f64> = x.rows_iter().take(n).map(|r| tree.predict(r)).collect();
            let mut accepted = None;
            for _ in 0..30 {
                let cand: Vec<f64> = f.iter().zip(&step).map(|(a, s)| a + tree.scale * s).collect();
                let l = log_loss(&cand, labels);
                if l <= loss {
                    accepted = Some((cand, l));
                    break;
                }
                tree.scale /= 2.0;
            }
            if let Some((cand, l)) = accepted {
                f = cand;
                loss = l;
                trees.push(tree);
            }
            loss_history.push(loss);
        }
        Self {
            base_margin,
            trees,
            n_features: x.ncols(),
            loss_history,
        }
    }

    pub fn margin(&self, row: &[f64]) -> f64 {
        self.base_margin + self.trees.iter().map(|t| t.predict(row)).sum::<f64>()
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.margin(row))
    }
}
