use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;
use crate::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

impl KnnParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.k == 0 {
            return Err(LearnError::InvalidHyperparameter("knn k must be at least 1".into()));
        }
        Ok(())
    }
}

/// Stored (standardized) training points. Votes carry the sample weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub cols: usize,
    pub points: Vec<f64>,
    pub labels: Vec<u8>,
    pub weights: Vec<f64>,
}

impl KnnModel {
    pub fn fit(x: &FeatureMatrix, weights: &[f64], params: &KnnParams) -> Self {
        Self {
            k: params.k,
            cols: x.cols(),
            points: (0..x.rows()).flat_map(|i| x.row(i).to_vec()).collect(),
            labels: x.labels().to_vec(),
            weights: weights.to_vec(),
        }
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.cols..(i + 1) * self.cols]
    }

    /// Indices of the `k` nearest training points, ordered by (squared
    /// distance, index).
    pub fn neighbors(&self, q: &[f64]) -> Vec<usize> {
        let n = self.labels.len();
        let k = self.k.min(n);
        let mut d: Vec<(f64, usize)> = (0..n)
            .map(|i| {
                let d2 = self.point(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
                (d2, i)
            })
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if k < n {
            d.select_nth_unstable_by(k, cmp);
            d.truncate(k);
        }
        d.sort_unstable_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }

    /// Weighted majority of the neighbors; ties go to healthy.
    pub fn predict_row(&self, q: &[f64]) -> u8 {
        let mut votes = [0.0; 2];
        for i in self.neighbors(q) {
            votes[self.labels[i] as usize] += self.weights[i];
        }
        u8::from(votes[1] > votes[0])
    }
}
