//! Cross-module checks on a short synthetic drive: files round-trip, the
//! held-out error report matches a direct recomputation, and a trained
//! detector separates clean steps from attack onsets.

use std::sync::OnceLock;

use spoofguard::attack::{generate_scenario_set, AttackGenConfig};
use spoofguard::data::{
    generate_synthetic_trace, load_labeled_trace, save_trace, split_train_validation, SynthConfig,
    Trace,
};
use spoofguard::detector::run_detection;
use spoofguard::eval::{confusion, metrics};
use spoofguard::mlp::TrainConfig;
use spoofguard::predictor::{step_rows, train_predictor, Predictor, StepRow, ValidationReport};
use spoofguard::rl::{train_agent, AgentFile, QLearningConfig};

fn clean() -> &'static Trace {
    static T: OnceLock<Trace> = OnceLock::new();
    T.get_or_init(|| {
        generate_synthetic_trace(&SynthConfig {
            duration_s: 120.0,
            rng_seed: 11,
            ..SynthConfig::default()
        })
        .unwrap()
    })
}

fn train_cfg() -> TrainConfig {
    TrainConfig {
        epochs: 40,
        rng_seed: 5,
        ..TrainConfig::default()
    }
}

fn trained() -> &'static (Predictor, ValidationReport) {
    static P: OnceLock<(Predictor, ValidationReport)> = OnceLock::new();
    P.get_or_init(|| train_predictor(&step_rows(clean()).unwrap(), &train_cfg()).unwrap())
}

fn held_out() -> Vec<StepRow> {
    let rows = step_rows(clean()).unwrap();
    split_train_validation(&rows, 0.7, train_cfg().rng_seed)
        .unwrap()
        .1
}

#[test]
fn validation_report_matches_recomputation() {
    let (predictor, report) = trained();
    let rows = held_out();
    let mut max = 0.0f64;
    let mut sq = 0.0;
    for row in &rows {
        let p = predictor.predict_features(&row.features);
        assert!(p >= 0.0);
        let e = (p - row.target_m).abs();
        max = max.max(e);
        sq += e * e;
    }
    assert_eq!(report.samples, rows.len());
    assert_eq!(report.max_abs_error_m, max);
    assert!((report.rmse_m - (sq / rows.len() as f64).sqrt()).abs() < 1e-15);
    let total = step_rows(clean()).unwrap().len();
    assert!((report.samples as f64 - 0.3 * total as f64).abs() <= 1.0);
}

#[test]
fn retraining_is_bit_exact() {
    let again = train_predictor(&step_rows(clean()).unwrap(), &train_cfg()).unwrap();
    assert_eq!(&again, trained());
}

#[test]
fn held_out_dd_stays_within_reported_error() {
    let (predictor, report) = trained();
    for row in held_out() {
        let dd = (predictor.predict_features(&row.features) - row.target_m).abs();
        assert!(dd <= report.max_abs_error_m);
    }
}

#[test]
fn scenario_files_round_trip() {
    let set = generate_scenario_set(
        clean(),
        &AttackGenConfig {
            scenario_count: 3,
            max_attacks: 20,
            min_attacks: 4,
            ..AttackGenConfig::default()
        },
        9,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    for s in &set.scenarios {
        let path = dir.path().join(format!("s{}.csv", s.id));
        save_trace(&path, &s.trace, Some(&s.labels)).unwrap();
        let (trace, labels) = load_labeled_trace(&path).unwrap();
        assert_eq!(labels.as_ref(), Some(&s.labels));
        assert_eq!(trace, s.trace);
    }
}

#[test]
fn trained_detector_scores_held_out_scenarios() {
    let (predictor, report) = trained();
    let set = generate_scenario_set(
        clean(),
        &AttackGenConfig {
            scenario_count: 4,
            max_attacks: 30,
            min_attacks: 6,
            ..AttackGenConfig::default()
        },
        21,
    )
    .unwrap();

    let train = &set.scenarios[1];
    let series = run_detection(&train.trace, predictor, 0.0)
        .unwrap()
        .dd_samples(&train.labels)
        .unwrap();
    let cfg = QLearningConfig {
        initial_threshold_m: Some(report.max_abs_error_m),
        total_steps: 5000,
        ..QLearningConfig::default()
    };
    let agent = train_agent(&series, &cfg).unwrap();
    let threshold = agent.threshold.threshold_m;
    assert!(threshold.is_finite() && threshold > 0.0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("agent.json");
    AgentFile::new(&agent, &cfg).save(&path).unwrap();
    assert_eq!(AgentFile::load(&path).unwrap().threshold_m, threshold);

    for s in set.scenarios.iter().filter(|s| s.id != train.id) {
        let det = run_detection(&s.trace, predictor, threshold).unwrap();
        let truth = det.aligned_labels(&s.labels).unwrap();
        let m = metrics(&confusion(&det.flags(), &truth).unwrap()).unwrap();
        assert_eq!(m.recall, 1.0, "scenario {}", s.id);
        assert!(m.precision >= 0.93, "scenario {}: {m:?}", s.id);
    }
}
