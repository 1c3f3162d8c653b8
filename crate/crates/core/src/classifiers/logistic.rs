//! Penalized logistic regression by accelerated proximal gradient (FISTA).
//!
//! Minimizes `(1/n) sum logloss + (1/(n C)) penalty(w)` with the intercept
//! unpenalized, where `penalty` is `||w||_1`, `||w||^2 / 2`, or the elastic
//! net mix `r ||w||_1 + (1 - r) ||w||^2 / 2`. Scaling by `1/(n C)` leaves the
//! minimizer of the usual `C sum logloss + penalty` objective unchanged.

use serde::{Deserialize, Serialize};

use super::{LogisticParams, Penalty};
use crate::matrix::{dot, sigmoid, Matrix};
use crate::preprocess::soft_threshold;

const TOL: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticRegression {
    pub coef: Vec<f64>,
    pub intercept: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// L1 and L2 strengths of the scaled objective.
pub fn penalty_weights(params: &LogisticParams, n: usize) -> (f64, f64) {
    let scale = 1.0 / (n as f64 * params.c);
    let r = match params.penalty {
        Penalty::L1 => 1.0,
        Penalty::L2 => 0.0,
        Penalty::Elasticnet => params.l1_ratio.clamp(0.0, 1.0),
    };
    (r * scale, (1.0 - r) * scale)
}

fn log1p_exp(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Smooth part of the objective: mean log loss plus the L2 term.
pub fn smooth_objective(x: &Matrix, y: &[u8], w: &[f64], b: f64, l2: f64) -> f64 {
    let n = x.nrows() as f64;
    let loss: f64 = x
        .rows_iter()
        .zip(y)
        .map(|(r, &yi)| {
            let z = dot(r, w) + b;
            log1p_exp(z) - yi as f64 * z
        })
        .sum();
    loss / n + 0.5 * l2 * dot(w, w)
}

/// Full objective including the L1 term.
pub fn objective(x: &Matrix, y: &[u8], w: &[f64], b: f64, params: &LogisticParams) -> f64 {
    let (l1, l2) = penalty_weights(params, x.nrows());
    smooth_objective(x, y, w, b, l2) + l1 * w.iter().map(|v| v.abs()).sum::<f64>()
}

/// Gradient of [`smooth_objective`] with respect to `(w, b)`.
pub fn smooth_gradient(x: &Matrix, y: &[u8], w: &[f64], b: f64, l2: f64) -> (Vec<f64>, f64) {
    let n = x.nrows() as f64;
    let mut gw: Vec<f64> = w.iter().map(|v| l2 * v).collect();
    let mut gb = 0.0;
    for (r, &yi) in x.rows_iter().zip(y) {
        let e = (sigmoid(dot(r, w) + b) - yi as f64) / n;
        for (g, xi) in gw.iter_mut().zip(r) {
            *g += e * xi;
        }
        gb += e;
    }
    (gw, gb)
}

/// Largest eigenvalue of `[X 1]^T [X 1] / n` by power iteration.
fn lipschitz_estimate(x: &Matrix) -> f64 {
    let p = x.ncols() + 1;
    let n = x.nrows() as f64;
    let mut v = vec![1.0 / (p as f64).sqrt(); p];
    let mut lambda = 0.0;
    for _ in 0..50 {
        let mut out = vec![0.0; p];
        for r in x.rows_iter() {
            let s = dot(r, &v[..p - 1]) + v[p - 1];
            for (o, xi) in out.iter_mut().zip(r) {
                *o += s * xi;
            }
            out[p - 1] += s;
        }
        let norm = dot(&out, &out).sqrt();
        if norm == 0.0 {
            break;
        }
        lambda = norm / n;
        v = out.iter().map(|o| o / norm).collect();
    }
    lambda.max(1e-12)
}

impl LogisticRegression {
    pub fn fit(x: &Matrix, y: &[u8], params: &LogisticParams) -> Self {
        let p = x.ncols();
        let (l1, l2) = penalty_weights(params, x.nrows());
        let max_iter = params.solver.max_iter();
        // Log loss has curvature at most 1/4.
        let mut lip = 0.25 * lipschitz_estimate(x) + l2;
        let mut w = vec![0.0; p];
        let mut b = super::prior_log_odds(y);
        let (mut zw, mut zb) = (w.clone(), b);
        let mut t = 1.0f64;
        let mut converged = false;
        let mut iterations = 0;
        for it in 0..max_iter {
            iterations = it + 1;
            let f_z = smooth_objective(x, y, &zw, zb, l2);
            let (gw, gb) = smooth_gradient(x, y, &zw, zb, l2);
            let (nw, nb) = loop {
                let step = 1.0 / lip;
                let nw: Vec<f64> = zw
                    .iter()
                    .zip(&gw)
                    .map(|(v, g)| soft_threshold(v - step * g, step * l1))
                    .collect();
                let nb = zb - step * gb;
                let dw: Vec<f64> = nw.iter().zip(&zw).map(|(a, c)| a - c).collect();
                let db = nb - zb;
                let model = f_z + dot(&gw, &dw) + gb * db + 0.5 * lip * (dot(&dw, &dw) + db * db);
                if smooth_objective(x, y, &nw, nb, l2) <= model + 1e-12 || lip > 1e12 {
                    break (nw, nb);
                }
                lip *= 2.0;
            };
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            let mom = (t - 1.0) / t_next;
            let change = nw
                .iter()
                .zip(&w)
                .map(|(a, c)| (a - c).abs())
                .fold((nb - b).abs(), f64::max);
            zw = nw.iter().zip(&w).map(|(a, c)| a + mom * (a - c)).collect();
            zb = nb + mom * (nb - b);
            w = nw;
            b = nb;
            t = t_next;
            if change < TOL {
                converged = true;
                break;
            }
        }
        Self {
            coef: w,
            intercept: b,
            converged,
            iterations,
        }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        dot(row, &self.coef) + self.intercept
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.decision(row))
    }
}
