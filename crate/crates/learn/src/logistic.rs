use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;
use crate::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogisticParams {
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        Self {
            lambda: 1e-2,
            max_iter: 500,
            tol: 1e-8,
        }
    }
}

impl LogisticParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(LearnError::InvalidHyperparameter("lambda must be nonnegative".into()));
        }
        if !(self.tol > 0.0) {
            return Err(LearnError::InvalidHyperparameter("tol must be positive".into()));
        }
        Ok(())
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `params = [w_0 .. w_{d−1}, b]`.
fn margin(params: &[f64], row: &[f64]) -> f64 {
    let d = row.len();
    params[d] + params[..d].iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
}

/// Weighted mean negative log-likelihood plus `λ/2 |w|²` (intercept not
/// penalized).
pub fn loss(params: &[f64], x: &FeatureMatrix, y: &[u8], weights: &[f64], lambda: f64) -> f64 {
    let d = x.cols();
    let total: f64 = weights.iter().sum();
    let nll: f64 = (0..x.rows())
        .map(|i| {
            let z = margin(params, x.row(i));
            weights[i] * (softplus(z) - y[i] as f64 * z)
        })
        .sum();
    nll / total + 0.5 * lambda * params[..d].iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`loss`].
pub fn loss_gradient(params: &[f64], x: &FeatureMatrix, y: &[u8], weights: &[f64], lambda: f64) -> Vec<f64> {
    let d = x.cols();
    let total: f64 = weights.iter().sum();
    let mut g = vec![0.0; d + 1];
    for i in 0..x.rows() {
        let row = x.row(i);
        let r = weights[i] * (sigmoid(margin(params, row)) - y[i] as f64) / total;
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += r * xj;
        }
        g[d] += r;
    }
    for j in 0..d {
        g[j] += lambda * params[j];
    }
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub params: Vec<f64>,
    pub iterations: usize,
}

impl LogisticModel {
    /// Gradient descent with Armijo backtracking from zero weights; stops at
    /// gradient norm `tol`, `max_iter`, or when the loss stops decreasing.
    pub fn fit(x: &FeatureMatrix, weights: &[f64], p: &LogisticParams) -> Self {
        let y = x.labels();
        let mut params = vec![0.0; x.cols() + 1];
        let mut f = loss(&params, x, y, weights, p.lambda);
        let mut step = 1.0;
        let mut iterations = 0;
        for it in 0..p.max_iter {
            iterations = it + 1;
            let g = loss_gradient(&params, x, y, weights, p.lambda);
            let gg: f64 = g.iter().map(|v| v * v).sum();
            if gg.sqrt() < p.tol {
                break;
            }
            step *= 2.0;
            let (trial, ft) = loop {
                let trial: Vec<f64> = params.iter().zip(&g).map(|(w, gi)| w - step * gi).collect();
                let ft = loss(&trial, x, y, weights, p.lambda);
                if ft <= f - 0.5 * step * gg || step < 1e-16 {
                    break (trial, ft);
                }
                step *= 0.5;
            };
            let decrease = f - ft;
            params = trial;
            f = ft;
            if decrease <= f64::EPSILON * (1.0 + f.abs()) {
                break;
            }
        }
        Self { params, iterations }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        margin(&self.params, row)
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        u8::from(self.decision(row) > 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(seed: u64, n: usize, d: usize) -> (FeatureMatrix, Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d).map(|_| rng.random_range(-2.0..2.0)).collect();
        let labels = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let weights = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let params = (0..=d).map(|_| rng.random_range(-1.5..1.5)).collect();
        (FeatureMatrix::new(d, data, labels).unwrap(), weights, params)
    }

    #[test]
    fn gradient_matches_central_differences() {
        for seed in 0..10 {
            let (x, w, p) = problem(seed, 30, 5);
            let lambda = 0.1;
            let g = loss_gradient(&p, &x, x.labels(), &w, lambda);
            let h = 1e-5;
            let mut worst: f64 = 0.0;
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for j in 0..p.len() {
                let (mut a, mut b) = (p.clone(), p.clone());
                a[j] += h;
                b[j] -= h;
                let fd = (loss(&a, &x, x.labels(), &w, lambda) - loss(&b, &x, x.labels(), &w, lambda)) / (2.0 * h);
                worst = worst.max((fd - g[j]).abs() / scale);
            }
            assert!(worst < 1e-5, "seed {seed}: relative error {worst:e}");
        }
    }

    #[test]
    fn intercept_gradient_vanishes_at_zero_on_balanced_centered_data() {
        let x = FeatureMatrix::new(2, vec![1.0, -2.0, -1.0, 2.0, 3.0, 0.5, -3.0, -0.5], vec![0, 1, 1, 0]).unwrap();
        let g = loss_gradient(&[0.0; 3], &x, x.labels(), &[1.0; 4], 0.01);
        assert_eq!(g[2], 0.0);
    }

    #[test]
    fn huge_lambda_gradient_is_the_penalty() {
        let (x, w, p) = problem(3, 20, 4);
        let lambda = 1e9;
        let g = loss_gradient(&p, &x, x.labels(), &w, lambda);
        for j in 0..4 {
            assert_relative_eq!(g[j] / lambda, p[j], max_relative = 1e-8);
        }
    }

    #[test]
    fn separable_pair_is_fit_exactly() {
        let x = FeatureMatrix::new(1, vec![-1.0, 1.0], vec![0, 1]).unwrap();
        let m = LogisticModel::fit(&x, &[1.0; 2], &LogisticParams::default());
        assert_eq!(m.predict_row(&[-1.0]), 0);
        assert_eq!(m.predict_row(&[1.0]), 1);
    }

    #[test]
    fn optimizer_reaches_a_stationary_point() {
        let (x, w, _) = problem(8, 80, 3);
        let p = LogisticParams { max_iter: 5000, ..LogisticParams::default() };
        let m = LogisticModel::fit(&x, &w, &p);
        let g = loss_gradient(&m.params, &x, x.labels(), &w, p.lambda);
        assert!(g.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-6);
    }
}
