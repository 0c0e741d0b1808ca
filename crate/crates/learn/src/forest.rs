use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;
use crate::tree::{fit_classifier, MaxFeatures, Tree, TreeParams};
use crate::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        let tree = TreeParams::default();
        Self {
            n_trees: 100,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
            max_depth: tree.max_depth,
            min_leaf: tree.min_leaf,
        }
    }
}

impl ForestParams {
    pub fn tree_params(&self) -> TreeParams {
        TreeParams {
            max_depth: self.max_depth,
            min_leaf: self.min_leaf,
            max_features: self.max_features,
        }
    }

    pub fn validate(&self) -> Result<(), LearnError> {
        if self.n_trees == 0 {
            return Err(LearnError::InvalidHyperparameter("n_trees must be at least 1".into()));
        }
        self.tree_params().validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<Tree>,
}

/// Generator of tree `t`: stream `t` of the learner seed, so the forest does
/// not depend on thread scheduling.
fn tree_rng(seed: u64, t: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(t as u64);
    rng
}

impl ForestModel {
    pub fn fit(x: &FeatureMatrix, weights: &[f64], p: &ForestParams, seed: u64) -> Self {
        let n = x.rows();
        let params = p.tree_params();
        let trees = (0..p.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = tree_rng(seed, t);
                let idx = if p.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                fit_classifier(x, weights, idx, &params, &mut rng)
            })
            .collect();
        Self { trees }
    }

    /// Mean of the trees' leaf cancer fractions.
    pub fn probability(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.value(row)).sum::<f64>() / self.trees.len() as f64
    }

    pub fn predict_row(&self, row: &[f64]) -> u8 {
        u8::from(self.probability(row) > 0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(seed: u64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 120;
        let d = 6;
        let v: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels = (0..n).map(|i| u8::from(v[i * d] - v[i * d + 3] + rng.random_range(-0.4..0.4) > 0.0)).collect();
        FeatureMatrix::new(d, v, labels).unwrap()
    }

    #[test]
    fn seeded_fit_is_reproducible_and_seed_sensitive() {
        let x = data(1);
        let p = ForestParams { n_trees: 12, ..ForestParams::default() };
        let a = ForestModel::fit(&x, &[1.0; 120], &p, 5);
        assert_eq!(a, ForestModel::fit(&x, &[1.0; 120], &p, 5));
        assert_ne!(a, ForestModel::fit(&x, &[1.0; 120], &p, 6));
    }

    #[test]
    fn thread_count_does_not_change_the_forest() {
        let x = data(2);
        let p = ForestParams { n_trees: 16, ..ForestParams::default() };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| ForestModel::fit(&x, &[1.0; 120], &p, 9));
        let b = four.install(|| ForestModel::fit(&x, &[1.0; 120], &p, 9));
        assert_eq!(a, b);
    }

    #[test]
    fn forest_beats_chance_on_held_out_rows() {
        let x = data(3);
        let train: Vec<usize> = (0..80).collect();
        let test: Vec<usize> = (80..120).collect();
        let m = ForestModel::fit(&x.select(&train), &[1.0; 80], &ForestParams::default(), 1);
        let correct = test.iter().filter(|&&i| m.predict_row(x.row(i)) == x.labels()[i]).count();
        assert!(correct >= 32, "{correct}/40");
    }
}
