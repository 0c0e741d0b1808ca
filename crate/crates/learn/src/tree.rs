//! CART trees with weighted Gini (classification) or squared-error
//! (regression) splits.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::FeatureMatrix;
use crate::LearnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Sqrt,
    Count(usize),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        match self {
            MaxFeatures::All => d,
            MaxFeatures::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::Count(k) => k.clamp(1, d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: 8,
            min_leaf: 3,
            max_features: MaxFeatures::All,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<(), LearnError> {
        if self.min_leaf == 0 {
            return Err(LearnError::InvalidHyperparameter("min_leaf must be at least 1".into()));
        }
        if self.max_features == MaxFeatures::Count(0) {
            return Err(LearnError::InvalidHyperparameter("max_features must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    Gini,
    SquaredError,
}

impl Criterion {
    /// Weighted total impurity from (Σw, Σwt, Σwt²).
    fn impurity(self, w: f64, s: f64, q: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        match self {
            Criterion::Gini => 2.0 * s * (w - s) / w,
            Criterion::SquaredError => (q - s * s / w).max(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Samples with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn value(&self, x: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match self.nodes[k] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    k = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], k: usize) -> usize {
            match nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes[0] {
            Node::Split { feature, threshold, .. } => Some((feature, threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Best split of the samples `idx` over `features` (ascending). Ties keep
/// the lowest feature, then the lowest threshold. Returns `None` when no
/// split with both sides holding `min_leaf` samples reduces impurity.
pub fn best_split(
    x: &FeatureMatrix,
    targets: &[f64],
    weights: &[f64],
    idx: &[usize],
    features: &[usize],
    criterion: Criterion,
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = idx.len();
    if n < 2 * min_leaf {
        return None;
    }
    let (mut w, mut s, mut q) = (0.0, 0.0, 0.0);
    for &i in idx {
        w += weights[i];
        s += weights[i] * targets[i];
        q += weights[i] * targets[i] * targets[i];
    }
    let parent = criterion.impurity(w, s, q);
    let mut best: Option<SplitChoice> = None;
    let mut best_gain = parent * 1e-12;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
        let (mut wl, mut sl, mut ql) = (0.0, 0.0, 0.0);
        for k in 0..n - 1 {
            let i = order[k];
            wl += weights[i];
            sl += weights[i] * targets[i];
            ql += weights[i] * targets[i] * targets[i];
            let left = k + 1;
            if left < min_leaf || n - left < min_leaf {
                continue;
            }
            let (a, b) = (x.get(i, f), x.get(order[k + 1], f));
            if a >= b {
                continue;
            }
            let gain = parent - criterion.impurity(wl, sl, ql) - criterion.impurity(w - wl, s - sl, q - ql);
            if gain > best_gain * (1.0 + 1e-12) {
                best_gain = gain;
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(SplitChoice { feature: f, threshold, gain });
            }
        }
    }
    best
}

/// Grows a tree on the samples `idx` (repeats allowed). Each node draws its
/// candidate features from `rng` unless all features are used.
pub fn grow(
    x: &FeatureMatrix,
    targets: &[f64],
    weights: &[f64],
    idx: Vec<usize>,
    params: &TreeParams,
    criterion: Criterion,
    rng: &mut ChaCha8Rng,
    leaf_value: &dyn Fn(&[usize]) -> f64,
) -> Tree {
    let mut nodes = Vec::new();
    let mut builder = Builder {
        x,
        targets,
        weights,
        params,
        criterion,
        k: params.max_features.resolve(x.cols()),
        leaf_value,
    };
    builder.node(&mut nodes, idx, 0, rng);
    Tree { nodes }
}

struct Builder<'a> {
    x: &'a FeatureMatrix,
    targets: &'a [f64],
    weights: &'a [f64],
    params: &'a TreeParams,
    criterion: Criterion,
    k: usize,
    leaf_value: &'a dyn Fn(&[usize]) -> f64,
}

impl Builder<'_> {
    fn features(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let d = self.x.cols();
        let mut all: Vec<usize> = (0..d).collect();
        if self.k < d {
            for i in 0..self.k {
                let j = rng.random_range(i..d);
                all.swap(i, j);
            }
            all.truncate(self.k);
            all.sort_unstable();
        }
        all
    }

    fn node(&mut self, nodes: &mut Vec<Node>, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let at = nodes.len();
        nodes.push(Node::Leaf {
            value: (self.leaf_value)(&idx),
        });
        if depth >= self.params.max_depth {
            return at;
        }
        let features = self.features(rng);
        let Some(split) = best_split(
            self.x,
            self.targets,
            self.weights,
            &idx,
            &features,
            self.criterion,
            self.params.min_leaf,
        ) else {
            return at;
        };
        let (l, r): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.x.get(i, split.feature) <= split.threshold);
        let left = self.node(nodes, l, depth + 1, rng);
        let right = self.node(nodes, r, depth + 1, rng);
        nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

/// Weighted fraction of class 1 among `idx`.
pub fn class_one_fraction(labels: &[f64], weights: &[f64], idx: &[usize]) -> f64 {
    let (mut w, mut s) = (0.0, 0.0);
    for &i in idx {
        w += weights[i];
        s += weights[i] * labels[i];
    }
    if w > 0.0 {
        s / w
    } else {
        0.0
    }
}

/// Classification tree; a leaf predicts cancer when its weighted cancer
/// fraction exceeds one half.
pub fn fit_classifier(
    x: &FeatureMatrix,
    weights: &[f64],
    idx: Vec<usize>,
    params: &TreeParams,
    rng: &mut ChaCha8Rng,
) -> Tree {
    let y: Vec<f64> = x.labels().iter().map(|&l| l as f64).collect();
    grow(x, &y, weights, idx, params, Criterion::Gini, rng, &|s| class_one_fraction(&y, weights, s))
}
