//! Linear and quadratic discriminant analysis with Gaussian class models.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{LdaParams, QdaParams};
use crate::matrix::{dot, sigmoid, Matrix};

/// Cholesky factor of `s`, adding a ridge of `1e-6 * trace` (growing
/// tenfold on each failure) when `s` is not numerically positive definite.
pub(crate) fn robust_cholesky(s: &DMatrix<f64>) -> (Cholesky<f64, nalgebra::Dyn>, f64) {
    let p = s.nrows();
    let scale = s.diagonal().iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(1e-300);
    let well_conditioned = |c: &Cholesky<f64, nalgebra::Dyn>| {
        c.l_dirty().diagonal().iter().all(|&d| d * d > 1e-10 * scale)
    };
    if let Some(c) = Cholesky::new(s.clone()).filter(well_conditioned) {
        return (c, 0.0);
    }
    let mut ridge = 1e-6 * s.trace().abs().max(1e-12);
    loop {
        let m = s + DMatrix::identity(p, p) * ridge;
        if let Some(c) = Cholesky::new(m).filter(well_conditioned) {
            return (c, ridge);
        }
        ridge *= 10.0;
    }
}

fn class_means(x: &Matrix, labels: &[u8]) -> [Vec<f64>; 2] {
    let p = x.ncols();
    let mut sums = [vec![0.0; p], vec![0.0; p]];
    let mut counts = [0usize; 2];
    for (r, &l) in x.rows_iter().zip(labels) {
        counts[l as usize] += 1;
        for (s, v) in sums[l as usize].iter_mut().zip(r) {
            *s += v;
        }
    }
    for c in 0..2 {
        sums[c].iter_mut().for_each(|s| *s /= counts[c] as f64);
    }
    sums
}

/// Per-class scatter matrices `sum (x - mu)(x - mu)^T`.
fn scatter(x: &Matrix, labels: &[u8], means: &[Vec<f64>; 2]) -> [DMatrix<f64>; 2] {
    let p = x.ncols();
    let mut s = [DMatrix::zeros(p, p), DMatrix::zeros(p, p)];
    for (r, &l) in x.rows_iter().zip(labels) {
        let d = DVector::from_iterator(p, r.iter().zip(&means[l as usize]).map(|(a, m)| a - m));
        s[l as usize] += &d * d.transpose();
    }
    s
}

fn priors(labels: &[u8]) -> [f64; 2] {
    let pos = labels.iter().filter(|&&l| l == 1).count() as f64;
    let n = labels.len() as f64;
    [(n - pos) / n, pos / n]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lda {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub ridge: f64,
}

impl Lda {
    /// Pooled covariance shrunk toward its diagonal by the shrinkage
    /// clamped to [0, 1].
    pub fn fit(x: &Matrix, labels: &[u8], params: &LdaParams) -> Self {
        let n = x.nrows();
        let means = class_means(x, labels);
        let [s0, s1] = scatter(x, labels, &means);
        let denom = if n > 2 { n - 2 } else { n } as f64;
        let pooled = (s0 + s1) / denom;
        let s = params.shrinkage.clamp(0.0, 1.0);
        let diag = DMatrix::from_diagonal(&pooled.diagonal());
        let cov = pooled * (1.0 - s) + diag * s;
        let (chol, ridge) = robust_cholesky(&cov);
        let diff = DVector::from_iterator(x.ncols(), means[1].iter().zip(&means[0]).map(|(a, b)| a - b));
        let w = chol.solve(&diff);
        let mid: Vec<f64> = means[1].iter().zip(&means[0]).map(|(a, b)| (a + b) / 2.0).collect();
        let weights: Vec<f64> = w.iter().copied().collect();
        let pr = priors(labels);
        let bias = -dot(&weights, &mid) + (pr[1] / pr[0]).ln();
        Self {
            weights,
            bias,
            ridge,
        }
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(dot(row, &self.weights) + self.bias)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianClass {
    pub mean: Vec<f64>,
    /// Lower Cholesky factor of the covariance.
    pub chol: Matrix,
    pub log_det: f64,
    pub log_prior: f64,
}

impl GaussianClass {
    fn log_density(&self, row: &[f64]) -> f64 {
        // Forward substitution for L z = x - mu.
        let p = self.mean.len();
        let mut z = vec![0.0; p];
        for i in 0..p {
            let mut s = row[i] - self.mean[i];
            for j in 0..i {
                s -= self.chol.get(i, j) * z[j];
            }
            z[i] = s / self.chol.get(i, i);
        }
        -0.5 * self.log_det - 0.5 * dot(&z, &z) + self.log_prior
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Qda {
    pub classes: [GaussianClass; 2],
}

impl Qda {
    /// Per-class covariance blended toward the pooled covariance by the
    /// regularization clamped to [0, 1].
    pub fn fit(x: &Matrix, labels: &[u8], params: &QdaParams) -> Self {
        let n = x.nrows();
        let p = x.ncols();
        let means = class_means(x, labels);
        let sc = scatter(x, labels, &means);
        let counts = [
            labels.iter().filter(|&&l| l == 0).count(),
            labels.iter().filter(|&&l| l == 1).count(),
        ];
        let denom = if n > 2 { n - 2 } else { n } as f64;
        let pooled = (&sc[0] + &sc[1]) / denom;
        let r = params.regularization.clamp(0.0, 1.0);
        let pr = priors(labels);
        let classes = [0, 1].map(|c| {
            let own = &sc[c] / (counts[c].max(2) - 1) as f64;
            let cov = own * (1.0 - r) + &pooled * r;
            let (chol, _) = robust_cholesky(&cov);
            let l = chol.l();
            let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
            let mut m = Matrix::zeros(p, p);
            for i in 0..p {
                for j in 0..=i {
                    m.set(i, j, l[(i, j)]);
                }
            }
            GaussianClass {
                mean: means[c].clone(),
                chol: m,
                log_det,
                log_prior: pr[c].ln(),
            }
        });
        Self { classes }
    }

    pub fn n_features(&self) -> usize {
        self.classes[0].mean.len()
    }

    pub fn proba_row(&self, row: &[f64]) -> f64 {
        sigmoid(self.classes[1].log_density(row) - self.classes[0].log_density(row))
    }
}
