//! Seven binary classifiers behind one fit/predict interface, and the
//! Sens/Spec/eff evaluation over group splits.

pub mod boosting;
pub mod evaluation;
pub mod forest;
pub mod knn;
pub mod logistic;
pub mod matrix;
pub mod naive_bayes;
pub mod svm;
pub mod tree;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use boosting::{BoostingModel, BoostingParams};
pub use forest::{ForestModel, ForestParams};
pub use knn::{KnnModel, KnnParams};
pub use logistic::{loss_gradient, LogisticModel, LogisticParams};
pub use matrix::{FeatureMatrix, Standardizer};
pub use naive_bayes::{NaiveBayesModel, NaiveBayesParams};
pub use svm::{SvmModel, SvmParams};
pub use tree::{MaxFeatures, Tree, TreeParams};

#[derive(Debug, Error, PartialEq)]
pub enum LearnError {
    #[error("training set is empty")]
    EmptyTraining,
    #[error("degenerate training set: {0}")]
    DegenerateTraining(String),
    #[error("expected {expected} feature columns, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("model file: {0}")]
    Persistence(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Knn,
    NaiveBayes,
    DecisionTree,
    RandomForest,
    LogisticRegression,
    GradientBoosting,
    Svm,
}

impl Algorithm {
    /// Report order.
    pub const ALL: [Algorithm; 7] = [
        Algorithm::Knn,
        Algorithm::NaiveBayes,
        Algorithm::DecisionTree,
        Algorithm::RandomForest,
        Algorithm::LogisticRegression,
        Algorithm::GradientBoosting,
        Algorithm::Svm,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Algorithm::Knn => "knn",
            Algorithm::NaiveBayes => "naive_bayes",
            Algorithm::DecisionTree => "decision_tree",
            Algorithm::RandomForest => "random_forest",
            Algorithm::LogisticRegression => "logistic_regression",
            Algorithm::GradientBoosting => "gradient_boosting",
            Algorithm::Svm => "svm",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Algorithm::Knn => "K-nearest neighbors",
            Algorithm::NaiveBayes => "naive Bayesian classifier",
            Algorithm::DecisionTree => "decision tree",
            Algorithm::RandomForest => "random forest",
            Algorithm::LogisticRegression => "logistic regression",
            Algorithm::GradientBoosting => "gradient boosting",
            Algorithm::Svm => "support vector machine",
        }
    }

    /// knn, logistic regression and svm see z-scored features.
    pub fn standardizes(self) -> bool {
        matches!(self, Algorithm::Knn | Algorithm::LogisticRegression | Algorithm::Svm)
    }

    /// knn and naive Bayes accept a single-class training set.
    pub fn tolerates_single_class(self) -> bool {
        matches!(self, Algorithm::Knn | Algorithm::NaiveBayes)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Algorithm {
    type Err = LearnError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.key() == s.trim())
            .ok_or_else(|| LearnError::InvalidInput(format!("unknown classifier `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeight {
    /// Every sample counts once.
    #[default]
    None,
    /// Samples weighted by `n / (2 n_class)`.
    Balanced,
}

/// Per-algorithm settings; one section each in the learner config file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparameters {
    pub class_weight: ClassWeight,
    pub knn: KnnParams,
    pub naive_bayes: NaiveBayesParams,
    pub decision_tree: TreeParams,
    pub random_forest: ForestParams,
    pub logistic_regression: LogisticParams,
    pub gradient_boosting: BoostingParams,
    pub svm: SvmParams,
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<(), LearnError> {
        self.knn.validate()?;
        self.naive_bayes.validate()?;
        self.decision_tree.validate()?;
        self.random_forest.validate()?;
        self.logistic_regression.validate()?;
        self.gradient_boosting.validate()?;
        self.svm.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub algorithm: Algorithm,
    pub params: Hyperparameters,
    pub seed: u64,
}

impl LearnerSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            params: Hyperparameters::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fitted {
    Knn(KnnModel),
    NaiveBayes(NaiveBayesModel),
    DecisionTree(Tree),
    RandomForest(ForestModel),
    LogisticRegression(LogisticModel),
    GradientBoosting(BoostingModel),
    Svm(SvmModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub algorithm: Algorithm,
    pub n_features: usize,
    pub standardizer: Option<Standardizer>,
    pub fitted: Fitted,
}

fn sample_weights(x: &FeatureMatrix, cw: ClassWeight) -> Vec<f64> {
    match cw {
        ClassWeight::None => vec![1.0; x.rows()],
        ClassWeight::Balanced => {
            let counts = x.class_counts();
            let n = x.rows() as f64;
            x.labels().iter().map(|&l| n / (2.0 * counts[l as usize] as f64)).collect()
        }
    }
}

pub fn fit(spec: &LearnerSpec, train: &FeatureMatrix) -> Result<Model, LearnError> {
    spec.params.validate()?;
    if !train.is_labeled() {
        return Err(LearnError::EmptyTraining);
    }
    let counts = train.class_counts();
    let single = counts.contains(&0);
    if single && !spec.algorithm.tolerates_single_class() {
        return Err(LearnError::DegenerateTraining(format!(
            "{} needs both classes, got {} healthy and {} cancer",
            spec.algorithm, counts[0], counts[1]
        )));
    }
    let standardizer = spec.algorithm.standardizes().then(|| Standardizer::fit(train));
    let x = match &standardizer {
        Some(s) => s.apply(train),
        None => train.clone(),
    };
    let w = sample_weights(&x, spec.params.class_weight);
    let p = &spec.params;
    let fitted = match spec.algorithm {
        Algorithm::Knn => Fitted::Knn(KnnModel::fit(&x, &w, &p.knn)),
        Algorithm::NaiveBayes => Fitted::NaiveBayes(NaiveBayesModel::fit(&x, &w, &p.naive_bayes)),
        Algorithm::DecisionTree => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(spec.seed);
            Fitted::DecisionTree(tree::fit_classifier(&x, &w, (0..x.rows()).collect(), &p.decision_tree, &mut rng))
        }
        Algorithm::RandomForest => Fitted::RandomForest(ForestModel::fit(&x, &w, &p.random_forest, spec.seed)),
        Algorithm::LogisticRegression => Fitted::LogisticRegression(LogisticModel::fit(&x, &w, &p.logistic_regression)),
        Algorithm::GradientBoosting => Fitted::GradientBoosting(BoostingModel::fit(&x, &w, &p.gradient_boosting)),
        Algorithm::Svm => Fitted::Svm(SvmModel::fit(&x, &w, &p.svm)),
    };
    Ok(Model {
        algorithm: spec.algorithm,
        n_features: train.cols(),
        standardizer,
        fitted,
    })
}

pub fn predict(model: &Model, x: &FeatureMatrix) -> Result<Vec<u8>, LearnError> {
    model.predict(x)
}

const MODEL_FORMAT: &str = "rtmsim-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: Model,
}

impl Model {
    pub fn predict(&self, x: &FeatureMatrix) -> Result<Vec<u8>, LearnError> {
        if x.cols() != self.n_features {
            return Err(LearnError::DimensionMismatch {
                expected: self.n_features,
                found: x.cols(),
            });
        }
        let z;
        let x = match &self.standardizer {
            Some(s) => {
                z = s.apply(x);
                &z
            }
            None => x,
        };
        Ok((0..x.rows())
            .map(|i| {
                let r = x.row(i);
                match &self.fitted {
                    Fitted::Knn(m) => m.predict_row(r),
                    Fitted::NaiveBayes(m) => m.predict_row(r),
                    Fitted::DecisionTree(t) => u8::from(t.value(r) > 0.5),
                    Fitted::RandomForest(m) => m.predict_row(r),
                    Fitted::LogisticRegression(m) => m.predict_row(r),
                    Fitted::GradientBoosting(m) => m.predict_row(r),
                    Fitted::Svm(m) => m.predict_row(r),
                }
            })
            .collect())
    }

    /// Versioned JSON dump; floats round-trip exactly.
    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        serde_json::to_string_pretty(&file).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let file: ModelFile = serde_json::from_str(text).map_err(|e| LearnError::Persistence(e.to_string()))?;
        if file.format != MODEL_FORMAT {
            return Err(LearnError::Persistence(format!("not a model file (format `{}`)", file.format)));
        }
        if file.version != MODEL_VERSION {
            return Err(LearnError::Persistence(format!("unsupported model version {}", file.version)));
        }
        Ok(file.model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rtmsim_core::cohort::gaussian_cohort;
    use rtmsim_core::radiometry::Provenance;

    fn blobs(seed: u64, n: usize, d: usize, sep: f64) -> FeatureMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let l = (i % 2) as u8;
            for j in 0..d {
                data.push(30.0 + j as f64 + sep * l as f64 + rng.random_range(-1.0..1.0));
            }
            labels.push(l);
        }
        FeatureMatrix::new(d, data, labels).unwrap()
    }

    #[test]
    fn every_algorithm_fits_predicts_and_round_trips() {
        let x = blobs(1, 60, 4, 1.0);
        for a in Algorithm::ALL {
            let mut spec = LearnerSpec::new(a);
            spec.params.random_forest.n_trees = 10;
            spec.params.gradient_boosting.n_rounds = 10;
            let m = fit(&spec, &x).unwrap();
            let p = predict(&m, &x).unwrap();
            assert_eq!(p.len(), 60);
            let back = Model::from_json(&m.to_json()).unwrap();
            assert_eq!(back, m, "{a}");
            assert_eq!(predict(&back, &x).unwrap(), p);
            assert_eq!(fit(&spec, &x).unwrap(), m, "{a} is not deterministic");
        }
    }

    #[test]
    fn wrong_width_is_rejected() {
        let m = fit(&LearnerSpec::new(Algorithm::NaiveBayes), &blobs(1, 10, 3, 1.0)).unwrap();
        let x = FeatureMatrix::unlabeled(2, vec![0.0; 4]).unwrap();
        assert_eq!(m.predict(&x), Err(LearnError::DimensionMismatch { expected: 3, found: 2 }));
    }

    #[test]
    fn single_class_handling() {
        let x = FeatureMatrix::new(1, vec![1.0, 2.0, 3.0], vec![1, 1, 1]).unwrap();
        for a in Algorithm::ALL {
            let r = fit(&LearnerSpec::new(a), &x);
            if a.tolerates_single_class() {
                assert_eq!(r.unwrap().predict(&x).unwrap(), vec![1, 1, 1]);
            } else {
                assert!(matches!(r, Err(LearnError::DegenerateTraining(_))), "{a}");
            }
        }
        let empty = FeatureMatrix::new(1, vec![], vec![]).unwrap();
        assert_eq!(fit(&LearnerSpec::new(Algorithm::Knn), &empty), Err(LearnError::EmptyTraining));
    }

    #[test]
    fn bad_hyperparameters_are_rejected() {
        let mut spec = LearnerSpec::new(Algorithm::Knn);
        spec.params.knn.k = 0;
        assert!(matches!(fit(&spec, &blobs(0, 4, 1, 1.0)), Err(LearnError::InvalidHyperparameter(_))));
    }

    #[test]
    fn one_tree_forest_without_bootstrap_is_the_tree() {
        let x = blobs(3, 80, 5, 0.7);
        let mut tree = LearnerSpec::new(Algorithm::DecisionTree);
        tree.seed = 11;
        let mut forest = LearnerSpec::new(Algorithm::RandomForest);
        forest.seed = 11;
        forest.params.random_forest = ForestParams {
            n_trees: 1,
            bootstrap: false,
            max_features: tree.params.decision_tree.max_features,
            max_depth: tree.params.decision_tree.max_depth,
            min_leaf: tree.params.decision_tree.min_leaf,
        };
        let q = blobs(4, 50, 5, 0.7);
        assert_eq!(
            predict(&fit(&tree, &x).unwrap(), &q).unwrap(),
            predict(&fit(&forest, &x).unwrap(), &q).unwrap()
        );
    }

    #[test]
    fn balanced_weights_sum_to_n_with_equal_class_mass() {
        let x = FeatureMatrix::new(1, vec![0.0; 5], vec![0, 0, 0, 0, 1]).unwrap();
        let w = sample_weights(&x, ClassWeight::Balanced);
        assert!((w.iter().sum::<f64>() - 5.0).abs() < 1e-12);
        assert!((w[4] - w[..4].iter().sum::<f64>()).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn logistic_argmax_ignores_positive_feature_rescaling(seed in any::<u64>(), scale in prop::collection::vec(0.01f64..100.0, 3)) {
            let x = blobs(seed, 40, 3, 0.8);
            let q = blobs(seed ^ 1, 30, 3, 0.8);
            let rescale = |m: &FeatureMatrix| {
                let data = (0..m.rows()).flat_map(|i| m.row(i).iter().zip(&scale).map(|(v, s)| v * s).collect::<Vec<_>>()).collect();
                FeatureMatrix::new(3, data, m.labels().to_vec()).unwrap()
            };
            let spec = LearnerSpec::new(Algorithm::LogisticRegression);
            let a = predict(&fit(&spec, &x).unwrap(), &q).unwrap();
            let b = predict(&fit(&spec, &rescale(&x)).unwrap(), &rescale(&q)).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn every_learner_separates_three_sigma_classes() {
        use evaluation::{confusion, effectiveness};
        let train = FeatureMatrix::from_dataset(&gaussian_cohort(100, 100, 3.0, 1, Provenance::Model, "T"));
        let test = FeatureMatrix::from_dataset(&gaussian_cohort(100, 100, 3.0, 2, Provenance::Model, "S"));
        for a in Algorithm::ALL {
            let m = fit(&LearnerSpec::new(a), &train).unwrap();
            let c = confusion(&predict(&m, &test).unwrap(), test.labels()).unwrap();
            let eff = effectiveness(&c).unwrap().eff;
            assert!(eff >= 0.9, "{a}: eff {eff}");
        }
    }
}
