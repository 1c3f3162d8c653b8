//! Random forest of CART trees grown on bootstrap samples.

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::ForestParams;
use crate::matrix::Matrix;
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        /// Fraction of class-1 samples reaching the leaf.
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
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }
}

fn gini(pos: f64, n: f64) -> f64 {
    if n == 0.0 {
        return 0.0;
    }
    let p = pos / n;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: &'a Matrix,
    labels: &'a [u8],
    max_features: usize,
    min_samples_split: usize,
    max_depth: usize,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

impl Builder<'_> {
    /// Best (gain, feature, threshold) over a random feature subset.
    fn best_split(&self, rows: &[usize], rng: &mut Rng) -> Option<(f64, usize, f64)> {
        let n = rows.len() as f64;
        let pos = rows.iter().filter(|&&r| self.labels[r] == 1).count() as f64;
        let parent = gini(pos, n);
        let p = self.x.ncols();
        let mut best: Option<(f64, usize, f64)> = None;
        let feats = sample(rng, p, self.max_features.min(p));
        let mut order: Vec<(f64, u8)> = Vec::with_capacity(rows.len());
        for f in feats.iter() {
            order.clear();
            order.extend(rows.iter().map(|&r| (self.x.get(r, f), self.labels[r])));
            order.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_pos = 0.0;
            for k in 0..order.len() - 1 {
                left_pos += order[k].1 as f64;
                if order[k].0 == order[k + 1].0 {
                    continue;
                }
                let nl = (k + 1) as f64;
                let nr = n - nl;
                let gain = parent - (nl * gini(left_pos, nl) + nr * gini(pos - left_pos, nr)) / n;
                if gain > 1e-12 && best.is_none_or(|b| gain > b.0) {
                    best = Some((gain, f, (order[k].0 + order[k + 1].0) / 2.0));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        let n = rows.len() as f64;
        let pos = rows.iter().filter(|&&r| self.labels[r] == 1).count() as f64;
        self.nodes.push(Node::Leaf { value: pos / n });
        if depth >= self.max_depth || rows.len() < self.min_samples_split || pos == 0.0 || pos == n {
            return id;
        }
        let Some((gain, feature, threshold)) = self.best_split(&rows, rng) else {
            return id;
        };
        self.importance[feature] += gain * n;
        let (l, r): (Vec<usize>, Vec<usize>) =
            rows.into_iter().partition(|&r| self.x.get(r, feature) <= threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    pub n_features: usize,
    importances: Vec<f64>,
}

impl RandomForest {
    /// Each tree draws from its own seed derived from `seed` and its index,
    /// so results do not depend on execution order.
    pub fn fit(x: &Matrix, labels: &[u8], params: &ForestParams, seed: u64) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        let max_features = ((p as f64).sqrt() as usize).max(1);
        let mut trees = Vec::with_capacity(params.n_trees);
        let mut total = vec![0.0; p];
        for t in 0..params.n_trees {
            let mut rng = rng_from_seed(derive_seed(seed, &[t as u64]));
            let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let mut b = Builder {
                x,
                labels,
                max_features,
                min_samples_split: params.min_samples_split.max(2),
                max_depth: params.max_depth.unwrap_or(usize::MAX),
                nodes: Vec::new(),
                importance: vec![0.0; p],
            };
            b.grow(rows, 0, &mut rng);
            let s: f64 = b.importance.iter().sum();
            if s > 0.0 {
                for (a, v) in total.iter_mut().zip(&b.importance) {
                    *a += v / s;
                }
            }
            trees.push(Tree { nodes: b.nodes });
        }
        let s: f64 = total.iter().sum();
        if s > 0.0 {
            total.iter_mut().for_each(|v| *v /= s);
        }
        Self {
            trees,
            n_features: p,
            importances: total,
        }
    }

    /// Mean impurity decrease per feature, normalized to sum to one (all
    /// zero when no tree split).
    pub fn feature_importances(&self) -> Vec<f64> {
        self.importances.clone()
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(row)).sum::<f64>() / self.trees.len() as f64
    }
}
