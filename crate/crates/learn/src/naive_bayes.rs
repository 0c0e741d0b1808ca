use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;
use crate::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NaiveBayesParams {
    pub var_floor: f64,
}

impl Default for NaiveBayesParams {
    fn default() -> Self {
        Self { var_floor: 1e-9 }
    }
}

impl NaiveBayesParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.var_floor > 0.0 && self.var_floor.is_finite()) {
            return Err(LearnError::InvalidHyperparameter("var_floor must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub label: u8,
    pub log_prior: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Gaussian naive Bayes. A single-class training set yields a model that
/// always predicts that class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayesModel {
    pub classes: Vec<ClassStats>,
}

impl NaiveBayesModel {
    pub fn fit(x: &FeatureMatrix, weights: &[f64], params: &NaiveBayesParams) -> Self {
        let total: f64 = weights.iter().sum();
        let classes = [0u8, 1]
            .into_iter()
            .filter_map(|c| {
                let idx: Vec<usize> = (0..x.rows()).filter(|&i| x.labels()[i] == c).collect();
                let w: f64 = idx.iter().map(|&i| weights[i]).sum();
                if idx.is_empty() || w <= 0.0 {
                    return None;
                }
                let mut mean = vec![0.0; x.cols()];
                for &i in &idx {
                    for (m, v) in mean.iter_mut().zip(x.row(i)) {
                        *m += weights[i] * v;
                    }
                }
                mean.iter_mut().for_each(|m| *m /= w);
                let mut var = vec![0.0; x.cols()];
                for &i in &idx {
                    for (j, v) in x.row(i).iter().enumerate() {
                        var[j] += weights[i] * (v - mean[j]).powi(2);
                    }
                }
                var.iter_mut().for_each(|v| *v = (*v / w).max(params.var_floor));
                Some(ClassStats {
                    label: c,
                    log_prior: (w / total).ln(),
                    mean,
                    var,
                })
            })
            .collect();
        Self { classes }
    }

    /// Unnormalized log posterior of each fitted class.
    pub fn log_joint(&self, q: &[f64]) -> Vec<(u8, f64)> {
        self.classes
            .iter()
            .map(|c| {
                let ll: f64 = q
                    .iter()
                    .zip(c.mean.iter().zip(&c.var))
                    .map(|(x, (m, v))| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m).powi(2) / v))
                    .sum();
                (c.label, c.log_prior + ll)
            })
            .collect()
    }

    /// Ties go to healthy.
    pub fn predict_row(&self, q: &[f64]) -> u8 {
        let lj = self.log_joint(q);
        match lj.as_slice() {
            [(c, _)] => *c,
            [(_, a), (_, b)] => u8::from(b > a),
            _ => 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn two_point_unit_variance_posterior() {
        let x = FeatureMatrix::new(3, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0], vec![0, 1]).unwrap();
        let m = NaiveBayesModel::fit(&x, &[1.0; 2], &NaiveBayesParams { var_floor: 1.0 });
        let q = [0.2, 0.3, 0.1];
        // Equal priors and unit variances: log-odds = Σ (x−0)²/2 − (x−1)²/2 = Σ x − d/2.
        let lj = m.log_joint(&q);
        let log_odds = lj[1].1 - lj[0].1;
        assert_relative_eq!(log_odds, 0.6 - 1.5, epsilon = 1e-12);
        assert_eq!(m.predict_row(&q), 0);
        assert_eq!(m.predict_row(&[0.9, 0.6, 0.7]), 1);
    }

    #[test]
    fn hand_computed_posterior_with_priors() {
        // Class 0: x ∈ {0, 2} → mean 1, var 1. Class 1: x = 4 → var floored to 1.
        let x = FeatureMatrix::new(1, vec![0.0, 2.0, 4.0], vec![0, 0, 1]).unwrap();
        let m = NaiveBayesModel::fit(&x, &[1.0; 3], &NaiveBayesParams { var_floor: 1.0 });
        let q = 2.6;
        let p0 = (2.0f64 / 3.0) * (-(q - 1.0f64).powi(2) / 2.0).exp();
        let p1 = (1.0f64 / 3.0) * (-(q - 4.0f64).powi(2) / 2.0).exp();
        let lj = m.log_joint(&[q]);
        assert_relative_eq!(lj[1].1 - lj[0].1, (p1 / p0).ln(), epsilon = 1e-12);
        assert_eq!(m.predict_row(&[q]), u8::from(p1 > p0));
    }

    #[test]
    fn single_class_always_predicts_it() {
        let x = FeatureMatrix::new(1, vec![1.0, 2.0], vec![1, 1]).unwrap();
        let m = NaiveBayesModel::fit(&x, &[1.0; 2], &NaiveBayesParams::default());
        assert_eq!(m.predict_row(&[-100.0]), 1);
    }

    #[test]
    fn zero_variance_feature_is_floored() {
        let x = FeatureMatrix::new(1, vec![3.0, 3.0, 5.0, 5.0], vec![0, 0, 1, 1]).unwrap();
        let m = NaiveBayesModel::fit(&x, &[1.0; 4], &NaiveBayesParams::default());
        assert_eq!(m.classes[0].var[0], 1e-9);
        assert_eq!(m.predict_row(&[3.1]), 0);
        assert_eq!(m.predict_row(&[4.9]), 1);
    }
}
