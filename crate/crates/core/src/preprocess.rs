//! Workflow steps 1 to 8: feature selection, imputation, scaling and PCA.
//!
//! Each step is fitted on training data only and produces a [`FittedStep`]
//! that can be applied to any matrix with the same number of columns.
//! Selection steps never return an empty feature set; when a rule would
//! remove everything a documented fallback keeps one feature (or all
//! features for group selection) and sets the `fallback` flag.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::forest::RandomForest;
use crate::classifiers::logistic::LogisticRegression;
use crate::classifiers::{ForestParams, LogisticParams, LrSolver, Penalty};
use crate::matrix::{k_smallest, mean, minkowski, population_variance, Matrix};
use crate::rng::{derive_seed, rng_from_seed, tags};
use crate::search_space::WorkflowConfig;

/// Population variance below which a feature is dropped.
pub const VARIANCE_THRESHOLD: f64 = 0.01;
/// Standard deviations below this scale a feature to zero.
pub const MIN_SCALE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training data has no rows")]
    Empty,
    #[error("group slots cover {got} features, data has {expected}")]
    GroupSlots { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImputationMethod {
    Mean,
    Median,
    Mode,
    ConstantZero,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaVariant {
    /// Smallest number of components explaining at least 95% of variance.
    Var95,
    N10,
    N50,
    N100,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionModel {
    Lasso,
    LogisticRegression,
    RandomForest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnState {
    pub k: usize,
    /// Training rows, missing values included.
    pub train: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "step", rename_all = "snake_case")]
pub enum FittedStep {
    Select {
        name: String,
        n_in: usize,
        kept: Vec<usize>,
        fallback: bool,
    },
    Impute {
        method: ImputationMethod,
        fill: Vec<f64>,
        knn: Option<KnnState>,
    },
    Scale {
        center: Vec<f64>,
        scale: Vec<f64>,
    },
    Project {
        mean: Vec<f64>,
        /// `n_in x n_out` basis, one component per column.
        components: Matrix,
        explained_variance: Vec<f64>,
    },
}

impl FittedStep {
    pub fn n_in(&self) -> usize {
        match self {
            Self::Select { n_in, .. } => *n_in,
            Self::Impute { fill, .. } => fill.len(),
            Self::Scale { center, .. } => center.len(),
            Self::Project { mean, .. } => mean.len(),
        }
    }

    pub fn n_out(&self) -> usize {
        match self {
            Self::Select { kept, .. } => kept.len(),
            Self::Project { components, .. } => components.ncols(),
            _ => self.n_in(),
        }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix, PreprocessError> {
        if x.ncols() != self.n_in() {
            return Err(PreprocessError::DimensionMismatch {
                expected: self.n_in(),
                got: x.ncols(),
            });
        }
        Ok(match self {
            Self::Select { kept, .. } => x.select_cols(kept),
            Self::Impute { fill, knn, .. } => {
                let mut out = x.clone();
                for r in 0..x.nrows() {
                    if !x.row(r).iter().any(|v| v.is_nan()) {
                        continue;
                    }
                    match knn {
                        Some(st) => knn_impute_row(x.row(r), out.row_mut(r), st, fill),
                        None => {
                            for (v, &f) in out.row_mut(r).iter_mut().zip(fill) {
                                if v.is_nan() {
                                    *v = f;
                                }
                            }
                        }
                    }
                }
                out
            }
            Self::Scale { center, scale } => {
                let mut out = x.clone();
                for r in 0..x.nrows() {
                    for (j, v) in out.row_mut(r).iter_mut().enumerate() {
                        *v = if scale[j] < MIN_SCALE {
                            0.0
                        } else {
                            (*v - center[j]) / scale[j]
                        };
                    }
                }
                out
            }
            Self::Project {
                mean, components, ..
            } => {
                let k = components.ncols();
                let mut out = Matrix::zeros(x.nrows(), k);
                for r in 0..x.nrows() {
                    let row = x.row(r);
                    for c in 0..k {
                        let mut s = 0.0;
                        for (j, (&v, &m)) in row.iter().zip(mean).enumerate() {
                            s += (v - m) * components.get(j, c);
                        }
                        out.set(r, c, s);
                    }
                }
                out
            }
        })
    }
}

fn select(name: &str, n_in: usize, kept: Vec<usize>, fallback: bool) -> FittedStep {
    FittedStep::Select {
        name: name.to_string(),
        n_in,
        kept,
        fallback,
    }
}

/// Keeps features whose group slot is active; keeps all if none is.
pub fn groupwise_select(group_slots: &[usize], activators: &[bool]) -> FittedStep {
    let n = group_slots.len();
    let kept: Vec<usize> = (0..n)
        .filter(|&j| activators.get(group_slots[j]).copied().unwrap_or(false))
        .collect();
    if kept.is_empty() {
        select("group_selection", n, (0..n).collect(), true)
    } else {
        select("group_selection", n, kept, false)
    }
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 100].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q / 100.0 * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn observed_column(x: &Matrix, j: usize) -> Vec<f64> {
    (0..x.nrows())
        .map(|r| x.get(r, j))
        .filter(|v| !v.is_nan())
        .collect()
}

/// Most frequent value; ties go to the smallest value.
fn mode(values: &[f64]) -> f64 {
    let s = sorted(values);
    let (mut best, mut best_count) = (s[0], 0);
    let mut i = 0;
    while i < s.len() {
        let mut j = i;
        while j < s.len() && s[j] == s[i] {
            j += 1;
        }
        if j - i > best_count {
            best = s[i];
            best_count = j - i;
        }
        i = j;
    }
    best
}

/// Features with no observed training value are filled with zero.
pub fn impute_fit(x: &Matrix, method: ImputationMethod, k: usize) -> FittedStep {
    let fill: Vec<f64> = (0..x.ncols())
        .map(|j| {
            let obs = observed_column(x, j);
            if obs.is_empty() {
                return 0.0;
            }
            match method {
                ImputationMethod::Mean | ImputationMethod::Knn => mean(&obs),
                ImputationMethod::Median => percentile(&sorted(&obs), 50.0),
                ImputationMethod::Mode => mode(&obs),
                ImputationMethod::ConstantZero => 0.0,
            }
        })
        .collect();
    let knn = (method == ImputationMethod::Knn).then(|| KnnState {
        k: k.max(1),
        train: x.clone(),
    });
    FittedStep::Impute { method, fill, knn }
}

/// Euclidean distance over coordinates observed in both rows, scaled up by
/// the fraction of coordinates present. Infinite when nothing is shared.
pub fn nan_euclidean(a: &[f64], b: &[f64]) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for (x, y) in a.iter().zip(b) {
        if !x.is_nan() && !y.is_nan() {
            sum += (x - y) * (x - y);
            count += 1;
        }
    }
    if count == 0 {
        return f64::INFINITY;
    }
    (sum * a.len() as f64 / count as f64).sqrt()
}

fn knn_impute_row(orig: &[f64], out: &mut [f64], st: &KnnState, fallback: &[f64]) {
    let dist: Vec<f64> = st.train.rows_iter().map(|t| nan_euclidean(orig, t)).collect();
    for f in 0..orig.len() {
        if !orig[f].is_nan() {
            continue;
        }
        let donors: Vec<usize> = (0..st.train.nrows())
            .filter(|&r| !st.train.get(r, f).is_nan() && dist[r].is_finite())
            .collect();
        if donors.is_empty() {
            out[f] = fallback[f];
            continue;
        }
        let d: Vec<f64> = donors.iter().map(|&r| dist[r]).collect();
        let near = k_smallest(&d, st.k);
        out[f] = near.iter().map(|&i| st.train.get(donors[i], f)).sum::<f64>() / near.len() as f64;
    }
}

/// Drops features with population variance below [`VARIANCE_THRESHOLD`].
pub fn variance_threshold_fit(x: &Matrix) -> FittedStep {
    let var: Vec<f64> = (0..x.ncols())
        .map(|j| population_variance(&x.column(j)))
        .collect();
    let kept: Vec<usize> = (0..x.ncols())
        .filter(|&j| var[j] >= VARIANCE_THRESHOLD)
        .collect();
    if kept.is_empty() {
        select("variance_threshold", x.ncols(), vec![argmax(&var)], true)
    } else {
        select("variance_threshold", x.ncols(), kept, false)
    }
}

/// First index of the largest value.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Mean and population std of the values inside the inclusive
/// [5th, 95th] percentile range. Falls back to all values if the range
/// holds none (possible for two distinct values).
pub fn robust_moments(values: &[f64]) -> (f64, f64) {
    let s = sorted(values);
    let (lo, hi) = (percentile(&s, 5.0), percentile(&s, 95.0));
    let mut inside: Vec<f64> = values.iter().copied().filter(|&v| v >= lo && v <= hi).collect();
    if inside.is_empty() {
        inside = values.to_vec();
    }
    (mean(&inside), population_variance(&inside).sqrt())
}

pub fn robust_zscore_fit(x: &Matrix) -> FittedStep {
    let (center, scale) = (0..x.ncols()).map(|j| robust_moments(&x.column(j))).unzip();
    FittedStep::Scale { center, scale }
}

/// ReliefF weights accumulated over the given sample rows.
///
/// For each sampled row the `k` nearest hits and misses (Minkowski distance
/// with exponent `p`, ties by row index) contribute
/// `mean |diff to misses| - mean |diff to hits|` per feature.
pub fn relief_weights(x: &Matrix, labels: &[u8], sample: &[usize], k: usize, p: f64) -> Vec<f64> {
    let n = x.nrows();
    let mut w = vec![0.0; x.ncols()];
    for &i in sample {
        let xi = x.row(i);
        let mut hits = Vec::new();
        let mut misses = Vec::new();
        for r in 0..n {
            if r == i {
                continue;
            }
            let d = minkowski(xi, x.row(r), p);
            if labels[r] == labels[i] {
                hits.push((d, r));
            } else {
                misses.push((d, r));
            }
        }
        for (set, sign) in [(&mut hits, -1.0), (&mut misses, 1.0)] {
            set.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            set.truncate(k);
            if set.is_empty() {
                continue;
            }
            let m = set.len() as f64;
            for &(_, r) in set.iter() {
                for (wj, (a, b)) in w.iter_mut().zip(xi.iter().zip(x.row(r))) {
                    *wj += sign * (a - b).abs() / m;
                }
            }
        }
    }
    let m = sample.len().max(1) as f64;
    w.iter_mut().for_each(|v| *v /= m);
    w
}

/// Indices of the `k` largest scores, ties by lower index, returned sorted.
fn top_k(scores: &[f64], k: usize) -> Vec<usize> {
    let neg: Vec<f64> = scores.iter().map(|v| -v).collect();
    let mut idx = k_smallest(&neg, k.min(scores.len()));
    idx.sort_unstable();
    idx
}

pub fn relief_fit(
    x: &Matrix,
    labels: &[u8],
    n_neighbors: usize,
    sample_fraction: f64,
    distance_p: u32,
    n_keep: usize,
    seed: u64,
) -> FittedStep {
    let n = x.nrows();
    let m = ((sample_fraction * n as f64).round() as usize).clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_from_seed(seed));
    idx.truncate(m);
    idx.sort_unstable();
    let w = relief_weights(x, labels, &idx, n_neighbors.max(1), distance_p as f64);
    select("relief", x.ncols(), top_k(&w, n_keep.max(1)), false)
}

/// LASSO on centred data by cyclic coordinate descent, minimizing
/// `(1 / 2n) ||y - Xw - b||^2 + alpha ||w||_1`.
pub fn lasso_coefficients(x: &Matrix, y: &[f64], alpha: f64) -> Vec<f64> {
    let (n, p) = (x.nrows(), x.ncols());
    let nf = n as f64;
    let means: Vec<f64> = (0..p).map(|j| mean(&x.column(j))).collect();
    let cols: Vec<Vec<f64>> = (0..p)
        .map(|j| x.column(j).iter().map(|v| v - means[j]).collect())
        .collect();
    let ym = mean(y);
    let mut resid: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let norms: Vec<f64> = cols.iter().map(|c| c.iter().map(|v| v * v).sum::<f64>() / nf).collect();
    let mut w = vec![0.0; p];
    for _ in 0..1000 {
        let mut max_change: f64 = 0.0;
        for j in 0..p {
            if norms[j] < MIN_SCALE {
                continue;
            }
            let rho: f64 = cols[j]
                .iter()
                .zip(&resid)
                .map(|(a, r)| a * r)
                .sum::<f64>()
                / nf
                + norms[j] * w[j];
            let new = soft_threshold(rho, alpha) / norms[j];
            let delta = new - w[j];
            if delta != 0.0 {
                for (r, a) in resid.iter_mut().zip(&cols[j]) {
                    *r -= delta * a;
                }
                w[j] = new;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < 1e-8 {
            break;
        }
    }
    w
}

pub fn soft_threshold(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// Absolute covariance of each feature with the label; used to pick the
/// single feature kept when LASSO zeroes everything.
fn label_association(x: &Matrix, y: &[f64]) -> Vec<f64> {
    let ym = mean(y);
    (0..x.ncols())
        .map(|j| {
            let c = x.column(j);
            let m = mean(&c);
            c.iter().zip(y).map(|(a, b)| (a - m) * (b - ym)).sum::<f64>().abs()
        })
        .collect()
}

fn above_mean(scores: &[f64]) -> Vec<usize> {
    let m = mean(scores);
    (0..scores.len()).filter(|&j| scores[j] > m).collect()
}

pub fn select_from_model_fit(
    x: &Matrix,
    labels: &[u8],
    model: SelectionModel,
    alpha: f64,
    n_trees: usize,
    seed: u64,
) -> FittedStep {
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let (kept, scores) = match model {
        SelectionModel::Lasso => {
            let w = lasso_coefficients(x, &y, alpha);
            let kept = (0..w.len()).filter(|&j| w[j] != 0.0).collect();
            (kept, label_association(x, &y))
        }
        SelectionModel::LogisticRegression => {
            let params = LogisticParams {
                c: 1.0,
                solver: LrSolver::Fast,
                penalty: Penalty::L2,
                l1_ratio: 0.0,
            };
            let m = LogisticRegression::fit(x, labels, &params);
            let abs: Vec<f64> = m.coef.iter().map(|c| c.abs()).collect();
            (above_mean(&abs), abs)
        }
        SelectionModel::RandomForest => {
            let params = ForestParams {
                n_trees: n_trees.max(1),
                min_samples_split: 2,
                max_depth: None,
            };
            let imp = RandomForest::fit(x, labels, &params, seed).feature_importances();
            (above_mean(&imp), imp)
        }
    };
    if kept.is_empty() {
        select("select_from_model", x.ncols(), vec![argmax(&scores)], true)
    } else {
        select("select_from_model", x.ncols(), kept, false)
    }
}

pub fn pca_fit(x: &Matrix, variant: PcaVariant) -> FittedStep {
    let (n, p) = (x.nrows(), x.ncols());
    let means: Vec<f64> = (0..p).map(|j| mean(&x.column(j))).collect();
    let mut centred = x.to_nalgebra();
    for j in 0..p {
        for r in 0..n {
            centred[(r, j)] -= means[j];
        }
    }
    let denom = (n.max(2) - 1) as f64;
    let cov: DMatrix<f64> = centred.transpose() * &centred / denom;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = vals.iter().sum();
    let top = vals.first().copied().unwrap_or(0.0);
    let rank = vals.iter().filter(|&&v| v > 1e-10 * top.max(f64::MIN_POSITIVE)).count().max(1);
    let k = match variant {
        PcaVariant::Var95 => {
            let mut acc = 0.0;
            let mut k = rank;
            for (i, v) in vals.iter().enumerate().take(rank) {
                acc += v;
                if total <= 0.0 || acc / total >= 0.95 - 1e-12 {
                    k = i + 1;
                    break;
                }
            }
            k
        }
        PcaVariant::N10 => 10.min(rank),
        PcaVariant::N50 => 50.min(rank),
        PcaVariant::N100 => 100.min(rank),
    };
    let mut components = Matrix::zeros(p, k);
    for (c, &i) in order.iter().take(k).enumerate() {
        let v = eig.eigenvectors.column(i);
        // Sign convention: largest-magnitude loading is positive.
        let mut big = 0;
        for j in 0..p {
            if v[j].abs() > v[big].abs() {
                big = j;
            }
        }
        let sign = if v[big] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..p {
            components.set(j, c, sign * v[j]);
        }
    }
    FittedStep::Project {
        mean: means,
        components,
        explained_variance: vals[..k].to_vec(),
    }
}

/// Midranks of the values (1-based, ties averaged).
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Mann-Whitney U p-value.
///
/// Uses the normal approximation with continuity and tie correction when
/// both groups have at least 8 values, and the exact permutation
/// distribution of the (mid)rank sum otherwise.
pub fn mann_whitney_p(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len(), b.len());
    if na == 0 || nb == 0 {
        return 1.0;
    }
    let all: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&all);
    if na >= 8 && nb >= 8 {
        let n = (na + nb) as f64;
        let ra: f64 = ranks[..na].iter().sum();
        let u = ra - (na * (na + 1)) as f64 / 2.0;
        let mu = (na * nb) as f64 / 2.0;
        let s = sorted(&all);
        let mut tie = 0.0;
        let mut i = 0;
        while i < s.len() {
            let mut j = i;
            while j < s.len() && s[j] == s[i] {
                j += 1;
            }
            let t = (j - i) as f64;
            tie += t * t * t - t;
            i = j;
        }
        let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie / (n * (n - 1.0)));
        if var <= 0.0 {
            return 1.0;
        }
        let z = ((u - mu).abs() - 0.5).max(0.0) / var.sqrt();
        return statrs::function::erf::erfc(z / std::f64::consts::SQRT_2).min(1.0);
    }
    exact_rank_sum_p(&ranks, na.min(nb), if na <= nb { 0 } else { na })
}

/// Exact two-sided p for the rank sum of the group of size `m` starting at
/// `start` in `ranks`, by counting subsets of doubled (integer) midranks.
fn exact_rank_sum_p(ranks: &[f64], m: usize, start: usize) -> f64 {
    let r2: Vec<usize> = ranks.iter().map(|r| (r * 2.0).round() as usize).collect();
    let observed: usize = r2[start..start + m].iter().sum();
    let max_sum: usize = {
        let mut s = r2.clone();
        s.sort_unstable();
        s.iter().rev().take(m).sum()
    };
    // ways[j][s]: number of j-subsets with doubled rank sum s.
    let mut ways = vec![vec![0.0f64; max_sum + 1]; m + 1];
    ways[0][0] = 1.0;
    for &r in &r2 {
        for j in (1..=m).rev() {
            let (prev, cur) = ways.split_at_mut(j);
            let (prev, cur) = (&prev[j - 1], &mut cur[0]);
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let total: f64 = ways[m].iter().sum();
    let le: f64 = ways[m][..=observed].iter().sum();
    let ge: f64 = ways[m][observed..].iter().sum();
    (2.0 * le.min(ge) / total).min(1.0)
}

pub fn univariate_fit(x: &Matrix, labels: &[u8], p_threshold: f64) -> FittedStep {
    let p: Vec<f64> = (0..x.ncols())
        .map(|j| {
            let col = x.column(j);
            let (a, b): (Vec<_>, Vec<_>) = col.iter().zip(labels).partition(|(_, &l)| l == 0);
            let a: Vec<f64> = a.into_iter().map(|(v, _)| *v).collect();
            let b: Vec<f64> = b.into_iter().map(|(v, _)| *v).collect();
            mann_whitney_p(&a, &b)
        })
        .collect();
    let kept: Vec<usize> = (0..p.len()).filter(|&j| p[j] < p_threshold).collect();
    if kept.is_empty() {
        let neg: Vec<f64> = p.iter().map(|v| -v).collect();
        select("univariate", x.ncols(), vec![argmax(&neg)], true)
    } else {
        select("univariate", x.ncols(), kept, false)
    }
}

/// Steps 1 to 8 fitted in order on one training matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FittedPipeline {
    pub steps: Vec<FittedStep>,
}

impl FittedPipeline {
    /// Fits every active step and returns the pipeline with the transformed
    /// training matrix.
    pub fn fit(
        cfg: &WorkflowConfig,
        x: &Matrix,
        labels: &[u8],
        group_slots: &[usize],
        seed: u64,
    ) -> Result<(Self, Matrix), PreprocessError> {
        if x.nrows() == 0 {
            return Err(PreprocessError::Empty);
        }
        if group_slots.len() != x.ncols() {
            return Err(PreprocessError::GroupSlots {
                expected: x.ncols(),
                got: group_slots.len(),
            });
        }
        let mut steps = Vec::new();
        let mut cur = x.clone();
        let mut push = |step: FittedStep, cur: &mut Matrix| -> Result<(), PreprocessError> {
            *cur = step.apply(cur)?;
            steps.push(step);
            Ok(())
        };
        if cfg.group_selection.enabled {
            push(groupwise_select(group_slots, &cfg.group_selection.groups), &mut cur)?;
        }
        push(
            impute_fit(&cur, cfg.imputation.method, cfg.imputation.knn_neighbors),
            &mut cur,
        )?;
        if cfg.variance_threshold {
            push(variance_threshold_fit(&cur), &mut cur)?;
        }
        push(robust_zscore_fit(&cur), &mut cur)?;
        let r = &cfg.relief;
        if r.enabled {
            let step = relief_fit(
                &cur,
                labels,
                r.n_neighbors,
                r.sample_fraction,
                r.distance_p,
                r.n_features,
                derive_seed(seed, &[tags::RELIEF]),
            );
            push(step, &mut cur)?;
        }
        let m = &cfg.select_from_model;
        if m.enabled {
            let step = select_from_model_fit(
                &cur,
                labels,
                m.model,
                m.lasso_alpha,
                m.rf_n_trees,
                derive_seed(seed, &[tags::SELECT_FROM_MODEL]),
            );
            push(step, &mut cur)?;
        }
        if cfg.pca.enabled {
            push(pca_fit(&cur, cfg.pca.variant), &mut cur)?;
        }
        if cfg.univariate.enabled {
            push(univariate_fit(&cur, labels, cfg.univariate.p_threshold), &mut cur)?;
        }
        Ok((Self { steps }, cur))
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix, PreprocessError> {
        let mut cur = x.clone();
        for s in &self.steps {
            cur = s.apply(&cur)?;
        }
        Ok(cur)
    }

    pub fn n_out(&self) -> Option<usize> {
        self.steps.last().map(FittedStep::n_out)
    }

    /// Whether any selection step had to fall back.
    pub fn fallbacks(&self) -> Vec<&str> {
        self.steps
            .iter()
            .filter_map(|s| match s {
                FittedStep::Select {
                    name, fallback: true, ..
                } => Some(name.as_str()),
                _ => None,
            })
            .collect()
    }
}
