//! Sensitivity, specificity and their geometric mean over repeated seeded
//! group splits, with a fixed-width report and a CSV dump.

use std::fmt::Write as _;

use rayon::prelude::*;
use rtmsim_core::cohort::{make_split, CohortError, Dataset, Group};
use thiserror::Error;

use crate::{fit, predict, Algorithm, FeatureMatrix, Hyperparameters, LearnError, LearnerSpec};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("{pred} predictions for {truth} labels")]
    LengthMismatch { pred: usize, truth: usize },
    #[error("metric undefined: {positives} positive and {negatives} negative cases")]
    UndefinedMetric { positives: usize, negatives: usize },
    #[error("repeats must be at least 1")]
    ZeroRepeats,
    #[error("split: {0}")]
    Split(String),
    #[error(transparent)]
    Learn(#[from] LearnError),
}

impl From<CohortError> for EvalError {
    fn from(e: CohortError) -> Self {
        EvalError::Split(e.to_string())
    }
}

/// Cancer is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl Confusion {
    pub fn positives(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn negatives(&self) -> usize {
        self.tn + self.fp
    }
}

pub fn confusion(pred: &[u8], truth: &[u8]) -> Result<Confusion, EvalError> {
    if pred.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            pred: pred.len(),
            truth: truth.len(),
        });
    }
    let mut c = Confusion::default();
    for (&p, &t) in pred.iter().zip(truth) {
        match (t, p) {
            (1, 1) => c.tp += 1,
            (1, _) => c.fn_ += 1,
            (_, 1) => c.fp += 1,
            _ => c.tn += 1,
        }
    }
    Ok(c)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub sens: f64,
    pub spec: f64,
    pub eff: f64,
}

pub fn effectiveness(c: &Confusion) -> Result<Metrics, EvalError> {
    let (p, n) = (c.positives(), c.negatives());
    if p == 0 || n == 0 {
        return Err(EvalError::UndefinedMetric {
            positives: p,
            negatives: n,
        });
    }
    let sens = c.tp as f64 / p as f64;
    let spec = c.tn as f64 / n as f64;
    Ok(Metrics {
        sens,
        spec,
        eff: (sens * spec).sqrt(),
    })
}

/// Population variance, two-pass.
pub fn population_variance(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Protocol {
    pub repeats: usize,
    pub base_seed: u64,
    /// Use `base_seed` for every repeat instead of `base_seed + r`.
    pub hold_seed: bool,
}

impl Protocol {
    pub fn new(repeats: usize, base_seed: u64) -> Self {
        Self {
            repeats,
            base_seed,
            hold_seed: false,
        }
    }

    pub fn seed(&self, r: usize) -> u64 {
        if self.hold_seed {
            self.base_seed
        } else {
            self.base_seed.wrapping_add(r as u64)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub classifier: Algorithm,
    pub group: Group,
    pub eff: f64,
    pub dis: f64,
    pub repeats: usize,
    pub runs: Vec<Metrics>,
}

/// Repeat r = 1..=repeats splits and fits with seed `protocol.seed(r)`; `eff`
/// is the mean and `dis` the population variance over repeats.
pub fn evaluate_group(
    params: &Hyperparameters,
    classifier: Algorithm,
    original: &Dataset,
    model: &Dataset,
    group: Group,
    protocol: &Protocol,
) -> Result<EvalResult, EvalError> {
    if protocol.repeats == 0 {
        return Err(EvalError::ZeroRepeats);
    }
    let runs: Result<Vec<Metrics>, EvalError> = (1..=protocol.repeats)
        .into_par_iter()
        .map(|r| {
            let seed = protocol.seed(r);
            let split = make_split(original, model, group, seed)?;
            let spec = LearnerSpec {
                algorithm: classifier,
                params: *params,
                seed,
            };
            let m = fit(&spec, &FeatureMatrix::from_dataset(&split.train))?;
            let test = FeatureMatrix::from_dataset(&split.test);
            effectiveness(&confusion(&predict(&m, &test)?, test.labels())?)
        })
        .collect();
    let runs = runs?;
    let effs: Vec<f64> = runs.iter().map(|m| m.eff).collect();
    Ok(EvalResult {
        classifier,
        group,
        eff: effs.iter().sum::<f64>() / effs.len() as f64,
        dis: population_variance(&effs),
        repeats: protocol.repeats,
        runs,
    })
}

/// One table cell: a result, or the reason it failed.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalCell {
    pub classifier: Algorithm,
    pub group: Group,
    pub outcome: Result<EvalResult, String>,
}

impl From<EvalResult> for EvalCell {
    fn from(r: EvalResult) -> Self {
        Self {
            classifier: r.classifier,
            group: r.group,
            outcome: Ok(r),
        }
    }
}

/// Every (classifier, group) pair, in report order; failures are kept per
/// cell.
pub fn evaluate_all(
    params: &Hyperparameters,
    classifiers: &[Algorithm],
    groups: &[Group],
    original: &Dataset,
    model: &Dataset,
    protocol: &Protocol,
) -> Vec<EvalCell> {
    let mut pairs: Vec<(Algorithm, Group)> =
        classifiers.iter().flat_map(|&c| groups.iter().map(move |&g| (c, g))).collect();
    pairs.sort();
    pairs.dedup();
    pairs
        .into_par_iter()
        .map(|(c, g)| EvalCell {
            classifier: c,
            group: g,
            outcome: evaluate_group(params, c, original, model, g, protocol).map_err(|e| e.to_string()),
        })
        .collect()
}

/// Round half away from zero to 2 decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// `eff / dis`, each rounded to 2 decimals and printed without trailing
/// zeros.
pub fn format_cell(eff: f64, dis: f64) -> String {
    format!("{} / {}", round2(eff), round2(dis))
}

const NAME_WIDTH: usize = 27;
const CELL_WIDTH: usize = 13;

/// Rows in report order for the classifiers present; columns for the groups
/// present (all four when the input is empty). Failed cells print `--`.
pub fn render_table(cells: &[EvalCell]) -> String {
    let mut groups: Vec<Group> = cells.iter().map(|c| c.group).collect();
    groups.sort();
    groups.dedup();
    if groups.is_empty() {
        groups = Group::ALL.to_vec();
    }
    let mut out = String::new();
    let _ = write!(out, "{:<NAME_WIDTH$}", "Classifier");
    for g in &groups {
        let _ = write!(out, "| {:<CELL_WIDTH$}", format!("Group {g}"));
    }
    out.push('\n');
    let _ = write!(out, "{:<NAME_WIDTH$}", "");
    for _ in &groups {
        let _ = write!(out, "| {:<CELL_WIDTH$}", "eff / dis");
    }
    out.push('\n');
    for a in Algorithm::ALL {
        if !cells.iter().any(|c| c.classifier == a) {
            continue;
        }
        let _ = write!(out, "{:<NAME_WIDTH$}", a.title());
        for g in &groups {
            let text = match cells.iter().find(|c| c.classifier == a && c.group == *g) {
                Some(EvalCell { outcome: Ok(r), .. }) => format_cell(r.eff, r.dis),
                Some(EvalCell { outcome: Err(_), .. }) => "--".into(),
                None => String::new(),
            };
            let _ = write!(out, "| {text:<CELL_WIDTH$}");
        }
        out.push('\n');
    }
    out
}

/// `classifier,group,eff,dis,repeats`; failed cells leave the numbers empty.
pub fn results_csv(cells: &[EvalCell]) -> String {
    let mut sorted: Vec<&EvalCell> = cells.iter().collect();
    sorted.sort_by_key(|c| (c.classifier, c.group));
    let mut out = String::from("classifier,group,eff,dis,repeats\n");
    for c in sorted {
        match &c.outcome {
            Ok(r) => {
                let _ = writeln!(out, "{},{},{},{},{}", c.classifier, c.group, r.eff, r.dis, r.repeats);
            }
            Err(_) => {
                let _ = writeln!(out, "{},{},,,", c.classifier, c.group);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rtmsim_core::cohort::gaussian_cohort;
    use rtmsim_core::radiometry::Provenance;

    fn result(classifier: Algorithm, group: Group, eff: f64, dis: f64) -> EvalResult {
        EvalResult {
            classifier,
            group,
            eff,
            dis,
            repeats: 10,
            runs: vec![],
        }
    }

    #[test]
    fn confusion_hand_counts() {
        let c = confusion(&[1, 1, 1, 1], &[1, 1, 1, 1]).unwrap();
        assert_eq!((c.tp, c.positives(), c.negatives()), (4, 4, 0));
        let c = confusion(&[0, 1], &[1, 0]).unwrap();
        assert_eq!((c.tp, c.fp, c.fn_, c.tn), (0, 1, 1, 0));
        let c = confusion(&[1, 0, 0, 1], &[1, 1, 0, 0]).unwrap();
        assert_eq!((c.tp, c.fn_, c.tn, c.fp), (1, 1, 1, 1));
        assert_eq!(confusion(&[1], &[1, 0]), Err(EvalError::LengthMismatch { pred: 1, truth: 2 }));
    }

    #[test]
    fn effectiveness_fixtures() {
        let perfect = Confusion { tp: 3, fn_: 0, tn: 5, fp: 0 };
        assert_eq!(effectiveness(&perfect).unwrap().eff, 1.0);
        let blind = Confusion { tp: 0, fn_: 4, tn: 7, fp: 1 };
        assert_eq!(effectiveness(&blind).unwrap().eff, 0.0);
        // Sens 0.8, Spec 0.9.
        let c = Confusion { tp: 8, fn_: 2, tn: 9, fp: 1 };
        let m = effectiveness(&c).unwrap();
        assert!((m.sens - 0.8).abs() < 1e-15 && (m.spec - 0.9).abs() < 1e-15);
        assert!((m.eff - 0.72f64.sqrt()).abs() < 1e-15);
        assert!((m.eff - 0.8485).abs() < 1e-4);
    }

    #[test]
    fn undefined_metric_is_reported() {
        let c = confusion(&[1, 1], &[1, 1]).unwrap();
        assert_eq!(effectiveness(&c), Err(EvalError::UndefinedMetric { positives: 2, negatives: 0 }));
    }

    #[test]
    fn cell_rendering_fixtures() {
        assert_eq!(format_cell(0.81, 0.02), "0.81 / 0.02");
        assert_eq!(format_cell(0.62, 0.0), "0.62 / 0");
        assert_eq!(format_cell(0.8049, 0.0751), "0.8 / 0.08");
        let t = render_table(&[result(Algorithm::GradientBoosting, Group::D, 0.81, 0.02).into()]);
        assert!(t.contains("gradient boosting"));
        assert!(t.contains("0.81 / 0.02"));
        let t = render_table(&[result(Algorithm::RandomForest, Group::A, 0.62, 0.0).into()]);
        assert!(t.contains("0.62 / 0 "));
    }

    #[test]
    fn empty_input_is_header_only() {
        let t = render_table(&[]);
        assert_eq!(t.lines().count(), 2);
        assert!(t.contains("Group A") && t.contains("Group D"));
        assert_eq!(results_csv(&[]), "classifier,group,eff,dis,repeats\n");
    }

    #[test]
    fn full_table_has_seven_rows_and_four_groups_in_order() {
        let cells: Vec<EvalCell> = Algorithm::ALL
            .into_iter()
            .rev()
            .flat_map(|a| Group::ALL.into_iter().map(move |g| result(a, g, 0.5, 0.01).into()))
            .collect();
        let t = render_table(&cells);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 9);
        assert!(lines[2].starts_with("K-nearest neighbors"));
        assert!(lines[8].starts_with("support vector machine"));
        assert_eq!(lines[0].matches("Group").count(), 4);
        assert_eq!(results_csv(&cells).lines().count(), 29);
    }

    #[test]
    fn failed_cells_print_dashes() {
        let cell = EvalCell {
            classifier: Algorithm::Svm,
            group: Group::C,
            outcome: Err("metric undefined".into()),
        };
        assert!(render_table(&[cell.clone()]).contains("| --"));
        assert_eq!(results_csv(&[cell]), "classifier,group,eff,dis,repeats\nsvm,C,,,\n");
    }

    fn separable() -> (Dataset, Dataset) {
        (
            gaussian_cohort(40, 20, 8.0, 1, Provenance::OriginalSurrogate, "O"),
            gaussian_cohort(50, 50, 8.0, 2, Provenance::Model, "M"),
        )
    }

    #[test]
    fn perfect_classifier_has_unit_eff_and_zero_dis() {
        let (o, m) = separable();
        for g in Group::ALL {
            let r = evaluate_group(&Hyperparameters::default(), Algorithm::LogisticRegression, &o, &m, g, &Protocol::new(4, 3))
                .unwrap();
            assert_eq!((r.eff, r.dis, r.runs.len()), (1.0, 0.0, 4));
        }
    }

    #[test]
    fn held_seed_repeats_have_zero_dispersion() {
        let o = gaussian_cohort(40, 20, 1.0, 1, Provenance::OriginalSurrogate, "O");
        let m = gaussian_cohort(50, 50, 1.0, 2, Provenance::Model, "M");
        let p = Protocol {
            hold_seed: true,
            ..Protocol::new(5, 9)
        };
        let r = evaluate_group(&Hyperparameters::default(), Algorithm::DecisionTree, &o, &m, Group::B, &p).unwrap();
        assert!(r.runs.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(r.dis, 0.0);
        let one = evaluate_group(&Hyperparameters::default(), Algorithm::Knn, &o, &m, Group::C, &Protocol::new(1, 0)).unwrap();
        assert_eq!(one.dis, 0.0);
    }

    #[test]
    fn zero_repeats_is_an_error() {
        let (o, m) = separable();
        let r = evaluate_group(&Hyperparameters::default(), Algorithm::Knn, &o, &m, Group::A, &Protocol::new(0, 0));
        assert_eq!(r, Err(EvalError::ZeroRepeats));
    }

    #[test]
    fn evaluate_all_is_deterministic_and_keeps_failures() {
        let (o, m) = separable();
        let p = Protocol::new(2, 5);
        let algs = [Algorithm::NaiveBayes, Algorithm::Knn];
        let a = evaluate_all(&Hyperparameters::default(), &algs, &[Group::C, Group::A], &o, &m, &p);
        let b = evaluate_all(&Hyperparameters::default(), &algs, &[Group::C, Group::A], &o, &m, &p);
        assert_eq!(results_csv(&a), results_csv(&b));
        assert_eq!(a.len(), 4);
        assert_eq!(a[0].classifier, Algorithm::Knn);

        // A model database without cancer cases leaves group A's test set
        // without positives.
        let healthy_only = gaussian_cohort(30, 0, 0.0, 4, Provenance::Model, "H");
        let cells = evaluate_all(&Hyperparameters::default(), &[Algorithm::Knn], &[Group::A, Group::C], &o, &healthy_only, &p);
        assert!(cells[0].outcome.as_ref().unwrap_err().contains("undefined"));
        assert!(cells[1].outcome.is_ok());
    }

    proptest! {
        #[test]
        fn eff_lies_between_sens_and_spec(tp in 0usize..50, fn_ in 0usize..50, tn in 0usize..50, fp in 0usize..50) {
            prop_assume!(tp + fn_ > 0 && tn + fp > 0);
            let m = effectiveness(&Confusion { tp, fn_, tn, fp }).unwrap();
            prop_assert!(m.eff <= m.sens.max(m.spec) + 1e-15);
            prop_assert!(m.eff >= m.sens.min(m.spec) - 1e-15);
        }

        #[test]
        fn metrics_are_invariant_under_joint_shuffles(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..60), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let split = |v: &[(u8, u8)]| -> (Vec<u8>, Vec<u8>) { v.iter().copied().unzip() };
            let (p1, t1) = split(&pairs);
            let (p2, t2) = split(&shuffled);
            prop_assert_eq!(confusion(&p1, &t1).unwrap(), confusion(&p2, &t2).unwrap());
        }

        #[test]
        fn variance_matches_direct_two_pass(v in prop::collection::vec(0.0f64..1.0, 1..30)) {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let direct = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            // Single-pass E[x²] − E[x]² as an independent route.
            let single = v.iter().map(|x| x * x).sum::<f64>() / n - mean * mean;
            prop_assert!((population_variance(&v) - direct).abs() <= 1e-12);
            prop_assert!((population_variance(&v) - single).abs() <= 1e-12);
        }

        #[test]
        fn rendering_rounds_half_away_from_zero(eff in 0.0f64..1.0, dis in 0.0f64..0.3) {
            let cell = format_cell(eff, dis);
            let (a, b) = cell.split_once(" / ").unwrap();
            let expect = |x: f64| {
                // Decimal rounding on the exact binary value.
                let s = format!("{:.20}", x);
                let (int, frac) = s.split_once('.').unwrap();
                let mut hundredths: i64 = int.parse::<i64>().unwrap() * 100 + frac[..2].parse::<i64>().unwrap();
                if frac.as_bytes()[2] >= b'5' {
                    hundredths += 1;
                }
                hundredths as f64 / 100.0
            };
            prop_assert_eq!(a.parse::<f64>().unwrap(), expect(eff));
            prop_assert_eq!(b.parse::<f64>().unwrap(), expect(dis));
        }
    }
}
