//! Per-step distance predictor: a 4-16-8-4-1 network mapping CAN speed,
//! steering, pedal and the previous GPS step distance to the current step
//! distance.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{fit_normalization, split_train_validation, NormalizationStats, Trace};
use crate::error::{Error, Result};
use crate::mlp::{self, load_model, save_model, Dataset, MlpNetwork, TrainConfig};

pub const PREDICTOR_LAYERS: [usize; 5] = [4, 16, 8, 4, 1];
pub const FEATURE_NAMES: [&str; 4] = ["speed_fps", "steer_deg", "pedal_pct", "prev_distance_m"];
pub const ROLE: &str = "predictor";
const DISTANCE_FEATURE: usize = 3;

/// Normalized predictor inputs for one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictorInput {
    pub speed_norm: f64,
    pub steer_norm: f64,
    pub pedal_norm: f64,
    pub prev_distance_norm: f64,
}

impl PredictorInput {
    pub fn as_array(&self) -> [f64; 4] {
        [
            self.speed_norm,
            self.steer_norm,
            self.pedal_norm,
            self.prev_distance_norm,
        ]
    }
}

/// Un-normalized features of step `t` and its measured distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRow {
    /// speed, steering and pedal at record `t`, then the step distance `d[t-1]`.
    pub features: [f64; 4],
    pub target_m: f64,
}

/// One row per step `t >= 1` of the trace: CAN values at record `t` and the
/// previous step distance predict `d[t]`.
pub fn step_rows(trace: &Trace) -> Result<Vec<StepRow>> {
    if trace.len() < 3 {
        return Err(Error::invalid(format!(
            "predictor rows need at least 3 records, trace has {}",
            trace.len()
        )));
    }
    let d = trace.step_distance_m();
    Ok((1..d.len())
        .map(|t| {
            let r = &trace.records()[t];
            StepRow {
                features: [r.speed_fps, r.steer_deg, r.pedal_pct, d[t - 1]],
                target_m: d[t],
            }
        })
        .collect())
}

/// Normalized `(input, target)` pairs for a clean trace.
pub fn make_training_rows(
    trace: &Trace,
    stats: &NormalizationStats,
) -> Result<Vec<(PredictorInput, f64)>> {
    check_stats(stats)?;
    let dist = &stats.features[DISTANCE_FEATURE];
    Ok(step_rows(trace)?
        .iter()
        .map(|row| {
            (
                normalize_input(stats, &row.features),
                dist.normalize(row.target_m),
            )
        })
        .collect())
}

fn normalize_input(stats: &NormalizationStats, features: &[f64; 4]) -> PredictorInput {
    let n = stats.apply(features);
    PredictorInput {
        speed_norm: n[0],
        steer_norm: n[1],
        pedal_norm: n[2],
        prev_distance_norm: n[3],
    }
}

fn check_stats(stats: &NormalizationStats) -> Result<()> {
    stats.validate()?;
    let names: Vec<&str> = stats.features.iter().map(|f| f.name.as_str()).collect();
    if names != FEATURE_NAMES {
        return Err(Error::invalid(format!(
            "predictor normalization must cover {FEATURE_NAMES:?}, got {names:?}"
        )));
    }
    Ok(())
}

pub fn build_predictor(rng_seed: u64) -> MlpNetwork {
    MlpNetwork::new(&PREDICTOR_LAYERS, rng_seed).expect("fixed architecture is valid")
}

/// Held-out error of a trained predictor, in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rmse_m: f64,
    pub max_abs_error_m: f64,
    pub samples: usize,
}

/// A trained network together with the input ranges it was trained on.
#[derive(Debug, Clone, PartialEq)]
pub struct Predictor {
    pub net: MlpNetwork,
    pub stats: NormalizationStats,
}

impl Predictor {
    pub fn new(net: MlpNetwork, stats: NormalizationStats) -> Result<Self> {
        check_stats(&stats)?;
        if net.layer_sizes() != PREDICTOR_LAYERS {
            return Err(Error::Shape(format!(
                "predictor needs layers {PREDICTOR_LAYERS:?}, got {:?}",
                net.layer_sizes()
            )));
        }
        Ok(Predictor { net, stats })
    }

    /// Predicted step distance in meters, clamped below at 0.
    pub fn predict_distance(&self, input: &PredictorInput) -> f64 {
        let out = self
            .net
            .forward(&input.as_array())
            .map(|y| y[0])
            .unwrap_or(f64::NAN);
        self.stats.features[DISTANCE_FEATURE]
            .denormalize(out)
            .max(0.0)
    }

    /// Prediction from un-normalized features. Each feature is first
    /// saturated to the range seen in training: a spoofed jump in the
    /// previous step distance would otherwise be extrapolated far outside
    /// anything the network has learned and leak into the next prediction.
    pub fn predict_features(&self, features: &[f64; 4]) -> f64 {
        let mut input = normalize_input(&self.stats, features);
        for v in [
            &mut input.speed_norm,
            &mut input.steer_norm,
            &mut input.pedal_norm,
            &mut input.prev_distance_norm,
        ] {
            *v = v.clamp(0.0, 1.0);
        }
        self.predict_distance(&input)
    }

    pub fn validate_on(&self, rows: &[StepRow]) -> ValidationReport {
        let mut sq = 0.0;
        let mut max = 0.0f64;
        for row in rows {
            let err = (self.predict_features(&row.features) - row.target_m).abs();
            sq += err * err;
            max = max.max(err);
        }
        ValidationReport {
            rmse_m: if rows.is_empty() {
                0.0
            } else {
                (sq / rows.len() as f64).sqrt()
            },
            max_abs_error_m: max,
            samples: rows.len(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        save_model(&self.net, Some(&self.stats), Some(ROLE), path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (net, stats) = load_model(path)?;
        let stats = stats.ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: "predictor model has no normalization".into(),
        })?;
        Predictor::new(net, stats).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Splits `rows` 70/30 under `cfg.rng_seed`, fits normalization on the
/// training part, trains a fresh predictor and scores it on the held-out
/// part.
pub fn train_predictor(
    rows: &[StepRow],
    cfg: &TrainConfig,
) -> Result<(Predictor, ValidationReport)> {
    let (train_rows, val_rows) = split_train_validation(rows, 0.7, cfg.rng_seed)?;
    let stats = fit_normalization(
        &FEATURE_NAMES,
        &train_rows.iter().map(|r| r.features).collect::<Vec<_>>(),
    )?;
    let dist = &stats.features[DISTANCE_FEATURE];

    let mut data = Dataset::new(4, 1);
    for row in &train_rows {
        data.push(
            &normalize_input(&stats, &row.features).as_array(),
            &[dist.normalize(row.target_m)],
        )?;
    }
    let mut net = build_predictor(cfg.rng_seed);
    mlp::train(&mut net, &data, cfg)?;

    let predictor = Predictor::new(net, stats)?;
    let report = predictor.validate_on(&val_rows);
    Ok((predictor, report))
}
