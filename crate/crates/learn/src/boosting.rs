//! Gradient boosting of regression trees on the logistic loss. Trees split on
//! squared error against the residuals `y − p`; each leaf takes the Newton
//! step `Σ w r / Σ w p(1 − p)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::logistic::sigmoid;
use crate::matrix::FeatureMatrix;
use crate::tree::{grow, Criterion, MaxFeatures, Tree, TreeParams};
use crate::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoostingParams {
    pub n_rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for BoostingParams {
    fn default() -> Self {
        Self {
            n_rounds: 100,
            learning_rate: 0.1,
            max_depth: 3,
            min_leaf: 1,
        }
    }
}

impl BoostingParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(LearnError::InvalidHyperparameter("learning_rate must be positive".into()));
        }
        if self.min_leaf == 0 {
            return Err(LearnError::InvalidHyperparameter("min_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostingModel {
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

/// Newton leaf value; the denominator is floored so pure leaves stay finite.
pub fn newton_leaf(residual: &[f64], hessian: &[f64], weights: &[f64], idx: &[usize]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for &i in idx {
        num += weights[i] * residual[i];
        den += weights[i] * hessian[i];
    }
    num / den.max(1e-12)
}

impl BoostingModel {
    /// Requires both classes (the base log-odds is otherwise infinite).
    pub fn fit(x: &FeatureMatrix, weights: &[f64], p: &BoostingParams) -> Self {
        let y: Vec<f64> = x.labels().iter().map(|&l| l as f64).collect();
        let total: f64 = weights.iter().sum();
        let pos: f64 = weights.iter().zip(&y).map(|(w, y)| w * y).sum::<f64>() / total;
        let base_score = (pos / (1.0 - pos)).ln();
        let params = TreeParams {
            max_depth: p.max_depth,
            min_leaf: p.min_leaf,
            max_features: MaxFeatures::All,
        };
        let mut f = vec![base_score; x.rows()];
        let mut trees = Vec::with_capacity(p.n_rounds);
        // All features are used, so the generator is never consulted.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..p.n_rounds {
            let prob: Vec<f64> = f.iter().map(|&v| sigmoid(v)).collect();
            let r: Vec<f64> = y.iter().zip(&prob).map(|(y, p)| y - p).collect();
            let h: Vec<f64> = prob.iter().map(|p| p * (1.0 - p)).collect();
            let tree = grow(
                x,
                &r,
                weights,
                (0..x.rows()).collect(),
                &params,
                Criterion::SquaredError,
                &mut rng,
                &|idx| newton_leaf(&r, &h, weights, idx),
            );
            for (i, fi) in f.iter_mut().enumerate() {
                *fi += p.learning_rate * tree.value(x.row(i));
            }
            trees.push(tree);
        }
        Self {
            base_score,
            learning_rate: p.learning_rate,
            trees,
        }
    }

    pub fn decision(&self, row: &[f64]) -> f64 {
        self.base_score + self.learning_rate * self.trees.iter().map(|t| t.value(row)).sum::<f64>()
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        u8::from(self.decision(row) > 0.0)
    }
}
