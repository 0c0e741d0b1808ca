use rtmsim_core::cohort::{gaussian_cohort, Group};
use rtmsim_core::radiometry::Provenance;
use rtmsim_learn::evaluation::{evaluate_all, evaluate_group, population_variance, results_csv, Protocol};
use rtmsim_learn::{fit, predict, Algorithm, FeatureMatrix, Hyperparameters, LearnerSpec, Model};

fn cohorts(sep: f64) -> (rtmsim_core::cohort::Dataset, rtmsim_core::cohort::Dataset) {
    (
        gaussian_cohort(60, 30, sep, 1, Provenance::OriginalSurrogate, "O"),
        gaussian_cohort(80, 80, sep, 2, Provenance::Model, "M"),
    )
}

#[test]
fn saved_model_predicts_like_the_original() {
    let (original, _) = cohorts(2.0);
    let x = FeatureMatrix::from_dataset(&original);
    let dir = tempfile::tempdir().unwrap();
    for algorithm in Algorithm::ALL {
        let model = fit(&LearnerSpec { seed: 3, ..LearnerSpec::new(algorithm) }, &x).unwrap();
        let path = dir.path().join(format!("{algorithm}.json"));
        std::fs::write(&path, model.to_json()).unwrap();
        let loaded = Model::from_json(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(predict(&loaded, &x).unwrap(), predict(&model, &x).unwrap(), "{algorithm}");
    }
}

#[test]
fn repeat_statistics_match_the_runs() {
    let (original, model) = cohorts(1.0);
    let r = evaluate_group(
        &Hyperparameters::default(),
        Algorithm::DecisionTree,
        &original,
        &model,
        Group::D,
        &Protocol::new(6, 40),
    )
    .unwrap();
    let effs: Vec<f64> = r.runs.iter().map(|m| m.eff).collect();
    assert_eq!(effs.len(), 6);
    assert!((r.eff - effs.iter().sum::<f64>() / 6.0).abs() < 1e-12);
    assert!((r.dis - population_variance(&effs)).abs() < 1e-12);
    assert!(r.dis > 0.0, "different splits should give different scores");
}

#[test]
fn held_seed_gives_zero_dispersion() {
    let (original, model) = cohorts(1.0);
    let protocol = Protocol { hold_seed: true, ..Protocol::new(4, 9) };
    let r = evaluate_group(&Hyperparameters::default(), Algorithm::RandomForest, &original, &model, Group::C, &protocol).unwrap();
    assert_eq!(r.dis, 0.0);
}

#[test]
fn full_grid_is_independent_of_thread_count() {
    let (original, model) = cohorts(1.5);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| {
            let cells = evaluate_all(
                &Hyperparameters::default(),
                &Algorithm::ALL,
                &Group::ALL,
                &original,
                &model,
                &Protocol::new(3, 0),
            );
            results_csv(&cells)
        })
    };
    let one = run(1);
    assert_eq!(one.lines().count(), 29);
    assert_eq!(one, run(3));
}
