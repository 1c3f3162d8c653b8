//! C-SVM trained by SMO with second-order working-set selection, with
//! posteriors from a sigmoid fitted on out-of-fold decision values.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{SvmKernel, SvmParams};
use crate::matrix::{dot, sigmoid, squared_euclidean, Matrix};
use crate::rng::{derive_seed, rng_from_seed};

const TAU: f64 = 1e-12;
const EPS: f64 = 1e-3;
const CALIBRATION_FOLDS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub kind: SvmKernel,
    pub degree: u32,
    pub coef0: f64,
    pub gamma: f64,
}

impl Kernel {
    /// Polynomial kernels use `1 / n_features` as their inner-product scale.
    pub fn new(params: &SvmParams, n_features: usize) -> Self {
        let gamma = match params.kernel {
            SvmKernel::Rbf => params.gamma,
            _ => 1.0 / n_features.max(1) as f64,
        };
        Self {
            kind: params.kernel,
            degree: params.degree,
            coef0: params.coef0,
            gamma,
        }
    }

    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match self.kind {
            SvmKernel::Linear => dot(a, b),
            SvmKernel::Poly => (self.gamma * dot(a, b) + self.coef0).powi(self.degree as i32),
            SvmKernel::Rbf => (-self.gamma * squared_euclidean(a, b)).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub alpha: Vec<f64>,
    /// Offset: decision value is `sum_i alpha_i y_i K(x_i, x) - rho`.
    pub rho: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Solves `min 0.5 a^T Q a - sum a` s.t. `0 <= a <= c`, `y^T a = 0`, where
/// `Q_ij = y_i y_j K_ij` and `k` is the row-major kernel matrix.
pub fn solve_dual(k: &[f64], y: &[f64], c: f64, max_iter: usize) -> DualSolution {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let is_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let is_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if is_up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                i = t;
                gmax = -y[t] * grad[t];
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !is_low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            if i != usize::MAX && v < gmax {
                let b = gmax - v;
                let mut a = k[i * n + i] + k[t * n + t] - 2.0 * k[i * n + t];
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -b * b / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < EPS {
            converged = true;
            break;
        }
        iterations += 1;
        let (ai, aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = ai - aj;
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (grad[i] - grad[j]) / quad;
            let sum = ai + aj;
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }
    // Offset from free variables, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };
    DualSolution {
        alpha,
        rho,
        iterations,
        converged,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct DecisionFunction {
    kernel: Kernel,
    support: Matrix,
    /// `alpha_i * y_i` for each support vector.
    coef: Vec<f64>,
    rho: f64,
}

impl DecisionFunction {
    fn train(x: &Matrix, labels: &[u8], params: &SvmParams) -> (Self, bool) {
        let n = x.nrows();
        let kernel = Kernel::new(params, x.ncols());
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in i..n {
                let v = kernel.eval(x.row(i), x.row(j));
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        let y: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
        let sol = solve_dual(&k, &y, params.c, 200 * n.max(100));
        let sv: Vec<usize> = (0..n).filter(|&i| sol.alpha[i] > 0.0).collect();
        let f = Self {
            kernel,
            support: x.select_rows(&sv),
            coef: sv.iter().map(|&i| sol.alpha[i] * y[i]).collect(),
            rho: sol.rho,
        };
        (f, sol.converged)
    }

    fn eval(&self, row: &[f64]) -> f64 {
        self.support
            .rows_iter()
            .take(self.support.nrows())
            .zip(&self.coef)
            .map(|(s, c)| c * self.kernel.eval(s, row))
            .sum::<f64>()
            - self.rho
    }
}

/// Sigmoid `P(y = 1 | f) = 1 / (1 + exp(a f + b))` fitted by Newton's
/// method with backtracking on regularized targets.
pub fn fit_sigmoid(dec: &[f64], labels: &[u8]) -> (f64, f64) {
    let prior1 = labels.iter().filter(|&&l| l == 1).count() as f64;
    let prior0 = labels.len() as f64 - prior1;
    let hi = (prior1 + 1.0) / (prior1 + 2.0);
    let lo = 1.0 / (prior0 + 2.0);
    let t: Vec<f64> = labels.iter().map(|&l| if l == 1 { hi } else { lo }).collect();
    let mut a = 0.0;
    let mut b = ((prior0 + 1.0) / (prior1 + 1.0)).ln();
    let objective = |a: f64, b: f64| -> f64 {
        dec.iter()
            .zip(&t)
            .map(|(&f, &ti)| {
                let z = f * a + b;
                if z >= 0.0 {
                    ti * z + (-z).exp().ln_1p()
                } else {
                    (ti - 1.0) * z + z.exp().ln_1p()
                }
            })
            .sum()
    };
    let mut fval = objective(a, b);
    for _ in 0..100 {
        let (mut h11, mut h22, mut h21, mut g1, mut g2) = (1e-12, 1e-12, 0.0, 0.0, 0.0);
        for (&f, &ti) in dec.iter().zip(&t) {
            let z = f * a + b;
            let (p, q) = if z >= 0.0 {
                let e = (-z).exp();
                (e / (1.0 + e), 1.0 / (1.0 + e))
            } else {
                let e = z.exp();
                (1.0 / (1.0 + e), e / (1.0 + e))
            };
            let d2 = p * q;
            h11 += f * f * d2;
            h22 += d2;
            h21 += f * d2;
            let d1 = ti - p;
            g1 += f * d1;
            g2 += d1;
        }
        if g1.abs() < 1e-5 && g2.abs() < 1e-5 {
            break;
        }
        let det = h11 * h22 - h21 * h21;
        let da = -(h22 * g1 - h21 * g2) / det;
        let db = -(-h21 * g1 + h11 * g2) / det;
        let gd = g1 * da + g2 * db;
        let mut step = 1.0;
        let mut improved = false;
        while step >= 1e-10 {
            let (na, nb) = (a + step * da, b + step * db);
            let nf = objective(na, nb);
            if nf < fval + 1e-4 * step * gd {
                a = na;
                b = nb;
                fval = nf;
                improved = true;
                break;
            }
            step /= 2.0;
        }
        if !improved {
            break;
        }
    }
    (a, b)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    decision: DecisionFunction,
    sigmoid_a: f64,
    sigmoid_b: f64,
    pub converged: bool,
}

impl SvmModel {
    pub fn fit(x: &Matrix, labels: &[u8], params: &SvmParams, seed: u64) -> Self {
        let (decision, converged) = DecisionFunction::train(x, labels, params);
        let dec = out_of_fold_decisions(x, labels, params, seed)
            .unwrap_or_else(|| x.rows_iter().take(x.nrows()).map(|r| decision.eval(r)).collect());
        let (sigmoid_a, sigmoid_b) = fit_sigmoid(&dec, labels);
        Self {
            decision,
            sigmoid_a,
            sigmoid_b,
            converged,
        }
    }

    pub fn n_features(&self) -> usize {
        self.decision.support.ncols()
    }

    pub fn decision_value(&self, row: &[f64]) -> f64 {
        self.decision.eval(row)
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(-(self.sigmoid_a * self.decision.eval(row) + self.sigmoid_b))
    }
}

/// Decision values from a stratified internal split, or `None` when a fold
/// would lack a class.
fn out_of_fold_decisions(x: &Matrix, labels: &[u8], params: &SvmParams, seed: u64) -> Option<Vec<f64>> {
    let mut fold = vec![0usize; labels.len()];
    let mut rng = rng_from_seed(derive_seed(seed, &[CALIBRATION_FOLDS as u64]));
    for c in 0..2u8 {
        let mut rows: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        if rows.len() < CALIBRATION_FOLDS {
            return None;
        }
        rows.shuffle(&mut rng);
        for (pos, &r) in rows.iter().enumerate() {
            fold[r] = pos % CALIBRATION_FOLDS;
        }
    }
    let mut dec = vec![0.0; labels.len()];
    for f in 0..CALIBRATION_FOLDS {
        let train: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] != f).collect();
        let test: Vec<usize> = (0..labels.len()).filter(|&i| fold[i] == f).collect();
        let tl: Vec<u8> = train.iter().map(|&i| labels[i]).collect();
        let (df, _) = DecisionFunction::train(&x.select_rows(&train), &tl, params);
        for &i in &test {
            dec[i] = df.eval(x.row(i));
        }
    }
    Some(dec)
}
