//! Runtime detection: predict each step's distance, compare it with the
//! distance between consecutive GPS fixes and flag the step when the
//! difference (DD) exceeds the threshold.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attack::LabelSeries;
use crate::data::Trace;
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::predictor::{step_rows, Predictor};
use crate::rl::{env_step, Action, DdSample, QLearningConfig, ThresholdState, TrainedAgent};

pub const DETECTION_HEADER: &str = "step,calculated_m,predicted_m,dd_m,flagged";

pub fn differential_distance(predicted_m: f64, calculated_m: f64) -> Result<f64> {
    if !predicted_m.is_finite() || !calculated_m.is_finite() {
        return Err(Error::invalid(format!(
            "differential distance of non-finite values ({predicted_m}, {calculated_m})"
        )));
    }
    Ok((predicted_m - calculated_m).abs())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionSample {
    pub step: usize,
    pub calculated_m: f64,
    pub predicted_m: f64,
    pub dd_m: f64,
    /// Threshold this sample was judged against.
    pub threshold_m: f64,
    pub flagged: bool,
}

/// One sample per step `t >= 1`; step 0 has no previous distance to feed the
/// predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSeries {
    /// Threshold in force at the start of the series.
    pub threshold_m: f64,
    pub samples: Vec<DetectionSample>,
}

impl DetectionSeries {
    pub fn flags(&self) -> Vec<bool> {
        self.samples.iter().map(|s| s.flagged).collect()
    }

    pub fn dd(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.dd_m).collect()
    }

    /// Ground truth for each sample's step.
    pub fn aligned_labels(&self, labels: &LabelSeries) -> Result<Vec<bool>> {
        let flags = labels.flags();
        if flags.len() != self.samples.len() + 1 {
            return Err(Error::Shape(format!(
                "{} labels do not cover {} detection samples plus the first step",
                flags.len(),
                self.samples.len()
            )));
        }
        Ok(self.samples.iter().map(|s| flags[s.step]).collect())
    }

    /// Labeled DD values, the agent's training input.
    pub fn dd_samples(&self, labels: &LabelSeries) -> Result<Vec<DdSample>> {
        Ok(self
            .samples
            .iter()
            .zip(self.aligned_labels(labels)?)
            .map(|(s, attack)| DdSample {
                dd_m: s.dd_m,
                attack,
            })
            .collect())
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::invalid(format!("detection CSV: {e}"));
        w.write_record(DETECTION_HEADER.split(','))
            .map_err(csv_err)?;
        for s in &self.samples {
            w.write_record([
                s.step.to_string(),
                s.calculated_m.to_string(),
                s.predicted_m.to_string(),
                s.dd_m.to_string(),
                u8::from(s.flagged).to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| Error::invalid(format!("detection CSV: {e}")))
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_csv()?)
    }
}

/// Predicted and measured distance for every step `t >= 1`. The predictor
/// sees the trace's own previous step distance, spoofed or not.
pub fn predict_steps(trace: &Trace, predictor: &Predictor) -> Result<Vec<(usize, f64, f64)>> {
    let rows = step_rows(trace)?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            let predicted = predictor.predict_features(&row.features);
            if !predicted.is_finite() {
                return Err(Error::invalid(format!(
                    "predictor produced {predicted} at step {}",
                    i + 1
                )));
            }
            Ok((i + 1, row.target_m, predicted))
        })
        .collect()
}

fn check_threshold(threshold_m: f64) -> Result<()> {
    if !(threshold_m.is_finite() && threshold_m >= 0.0) {
        return Err(Error::invalid(format!(
            "threshold {threshold_m} must be a finite distance >= 0"
        )));
    }
    Ok(())
}

/// Flags every step whose DD is strictly above `threshold_m`.
pub fn run_detection(
    trace: &Trace,
    predictor: &Predictor,
    threshold_m: f64,
) -> Result<DetectionSeries> {
    check_threshold(threshold_m)?;
    let samples = predict_steps(trace, predictor)?
        .into_iter()
        .map(|(step, calculated_m, predicted_m)| {
            let dd_m = differential_distance(predicted_m, calculated_m)?;
            Ok(DetectionSample {
                step,
                calculated_m,
                predicted_m,
                dd_m,
                threshold_m,
                flagged: dd_m > threshold_m,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DetectionSeries {
        threshold_m,
        samples,
    })
}

/// Keeps the agent in the loop: before each step the greedy action moves the
/// threshold, and the step is judged against the moved value.
pub fn run_detection_online(
    trace: &Trace,
    predictor: &Predictor,
    agent: &TrainedAgent,
    cfg: &QLearningConfig,
) -> Result<DetectionSeries> {
    let start = agent.threshold.threshold_m;
    check_threshold(start)?;
    let mut state = agent.threshold;
    let mut online = agent.clone();
    let mut samples = Vec::new();
    for (step, calculated_m, predicted_m) in predict_steps(trace, predictor)? {
        let dd_m = differential_distance(predicted_m, calculated_m)?;
        online.threshold = state;
        let action: Action = online.greedy(cfg, dd_m)?;
        // The label is unknown at run time, so the reward is ignored.
        let probe = DdSample {
            dd_m,
            attack: false,
        };
        let (next, flagged, _) = env_step(
            state,
            action,
            probe,
            cfg.threshold_step_m,
            cfg.threshold_max_m,
            &cfg.reward,
        );
        state = ThresholdState {
            threshold_m: next.threshold_m,
        };
        samples.push(DetectionSample {
            step,
            calculated_m,
            predicted_m,
            dd_m,
            threshold_m: state.threshold_m,
            flagged,
        });
    }
    Ok(DetectionSeries {
        threshold_m: start,
        samples,
    })
}
