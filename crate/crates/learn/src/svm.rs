//! Linear soft-margin SVM trained by full-batch subgradient descent on the
//! primal with weighted iterate averaging.

use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;
use crate::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self { c: 1.0, max_iter: 2000 }
    }
}

impl SvmParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(LearnError::InvalidHyperparameter("svm c must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(LearnError::InvalidHyperparameter("svm max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

fn margin(theta: &[f64], row: &[f64]) -> f64 {
    let d = row.len();
    theta[d] + theta[..d].iter().zip(row).map(|(w, x)| w * x).sum::<f64>()
}

fn sign(label: u8) -> f64 {
    if label == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `½(|w|² + b²) + C Σ wᵢ max(0, 1 − yᵢ(w·xᵢ + b))` with `θ = [w, b]`.
pub fn objective(theta: &[f64], x: &FeatureMatrix, weights: &[f64], c: f64) -> f64 {
    let reg = 0.5 * theta.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = (0..x.rows())
        .map(|i| weights[i] * (1.0 - sign(x.labels()[i]) * margin(theta, x.row(i))).max(0.0))
        .sum();
    reg + c * hinge
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub theta: Vec<f64>,
}

impl SvmModel {
    /// The objective divided by `C Σw` is `λ/2 |θ|² + mean hinge` with
    /// `λ = 1/(C Σw)`, λ-strongly convex; steps `1/(λt)`, iterates projected
    /// onto `|θ| ≤ 1/√λ`, averaged with weights `t`.
    pub fn fit(x: &FeatureMatrix, weights: &[f64], p: &SvmParams) -> Self {
        let d = x.cols();
        let total: f64 = weights.iter().sum();
        let lambda = 1.0 / (p.c * total);
        let radius = 1.0 / lambda.sqrt();
        let mut theta = vec![0.0; d + 1];
        let mut avg = vec![0.0; d + 1];
        let mut avg_weight = 0.0;
        let mut g = vec![0.0; d + 1];
        for t in 1..=p.max_iter {
            g.iter_mut().zip(&theta).for_each(|(gi, th)| *gi = lambda * th);
            for i in 0..x.rows() {
                let y = sign(x.labels()[i]);
                let row = x.row(i);
                if y * margin(&theta, row) < 1.0 {
                    let s = weights[i] * y / total;
                    for (gj, xj) in g.iter_mut().zip(row) {
                        *gj -= s * xj;
                    }
                    g[d] -= s;
                }
            }
            let eta = 1.0 / (lambda * t as f64);
            theta.iter_mut().zip(&g).for_each(|(th, gi)| *th -= eta * gi);
            let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > radius {
                theta.iter_mut().for_each(|v| *v *= radius / norm);
            }
            let w = t as f64;
            avg_weight += w;
            avg.iter_mut().zip(&theta).for_each(|(a, th)| *a += (w / avg_weight) * (th - *a));
        }
        Self { theta: avg }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        margin(&self.theta, row)
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        u8::from(self.decision(row) > 0.0)
    }
}
