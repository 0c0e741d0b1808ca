use rtmsim_core::cohort::Dataset;
use serde::{Deserialize, Serialize};

use crate::LearnError;

/// Row-major feature matrix; labels are 0 (healthy) or 1 (cancer) and may be
/// absent for prediction inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    cols: usize,
    data: Vec<f64>,
    labels: Vec<u8>,
}

impl FeatureMatrix {
    pub fn new(cols: usize, data: Vec<f64>, labels: Vec<u8>) -> Result<Self, LearnError> {
        let m = Self::unlabeled(cols, data)?;
        if labels.len() != m.rows() {
            return Err(LearnError::InvalidInput(format!(
                "{} labels for {} rows",
                labels.len(),
                m.rows()
            )));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(LearnError::InvalidInput(format!("label {l} is not 0 or 1")));
        }
        Ok(Self { labels, ..m })
    }

    pub fn unlabeled(cols: usize, data: Vec<f64>) -> Result<Self, LearnError> {
        if cols == 0 || data.len() % cols != 0 {
            return Err(LearnError::InvalidInput(format!(
                "{} values do not fill rows of {cols}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(LearnError::InvalidInput("non-finite feature value".into()));
        }
        Ok(Self {
            cols,
            data,
            labels: Vec::new(),
        })
    }

    /// Columns `t_mw_0..8, t_ir_0..8`; label 1 for cancer.
    pub fn from_dataset(d: &Dataset) -> Self {
        let data = d.records.iter().flat_map(|r| r.features()).collect();
        let labels = d.records.iter().map(|r| r.label.class()).collect();
        Self::new(2 * rtmsim_core::phantom::MEASUREMENT_POINTS, data, labels).expect("dataset records are validated")
    }

    pub fn rows(&self) -> usize {
        self.data.len() / self.cols
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn is_labeled(&self) -> bool {
        self.labels.len() == self.rows() && self.rows() > 0
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let ones = self.labels.iter().filter(|&&l| l == 1).count();
        [self.labels.len() - ones, ones]
    }

    /// Rows `idx` (repeats allowed), keeping labels if present.
    pub fn select(&self, idx: &[usize]) -> Self {
        let data = idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        let labels = if self.labels.is_empty() {
            Vec::new()
        } else {
            idx.iter().map(|&i| self.labels[i]).collect()
        };
        Self {
            cols: self.cols,
            data,
            labels,
        }
    }

    fn map_values(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        let data = self.data.iter().enumerate().map(|(k, &v)| f(k % self.cols, v)).collect();
        Self {
            cols: self.cols,
            data,
            labels: self.labels.clone(),
        }
    }
}

/// Per-column z-scoring fitted on training data. Constant columns keep
/// scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Self {
        let n = x.rows() as f64;
        let mut mean = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            for (j, v) in x.row(i).iter().enumerate() {
                var[j] += (v - mean[j]).powi(2);
            }
        }
        let scale = var
            .iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, x: &FeatureMatrix) -> FeatureMatrix {
        x.map_values(|j, v| (v - self.mean[j]) / self.scale[j])
    }
}
