//! Sensor traces: ingestion, synchronization, normalization, splitting and
//! synthetic generation.

mod normalize;
mod split;
mod sync;
mod synth;
mod trace_csv;

pub use normalize::{fit_normalization, FeatureRange, NormalizationStats};
pub use split::split_train_validation;
pub use sync::{synchronize, CanSample, GpsFix};
pub use synth::{generate_synthetic_trace, SynthConfig};
pub use trace_csv::{load_labeled_trace, load_trace, save_trace, TRACE_HEADER};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{haversine_unchecked, GeoPoint, EARTH_RADIUS_M};

pub const FEET_TO_METERS: f64 = 0.3048;

/// One time-synchronized GPS + CAN sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorRecord {
    /// Unix seconds.
    pub timestamp_s: f64,
    pub position: GeoPoint,
    pub speed_fps: f64,
    /// Steering wheel angle.
    pub steer_deg: f64,
    /// Relative accelerator pedal position.
    pub pedal_pct: f64,
}

impl SensorRecord {
    pub fn speed_mps(&self) -> f64 {
        self.speed_fps * FEET_TO_METERS
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if !self.timestamp_s.is_finite() {
            return Err("non-finite timestamp".into());
        }
        self.position.validate().map_err(|e| e.to_string())?;
        if !self.speed_fps.is_finite() || self.speed_fps < 0.0 {
            return Err(format!("speed {} must be finite and >= 0", self.speed_fps));
        }
        if !self.steer_deg.is_finite() {
            return Err("non-finite steering angle".into());
        }
        if !self.pedal_pct.is_finite() || !(0.0..=100.0).contains(&self.pedal_pct) {
            return Err(format!("pedal {} outside [0, 100]", self.pedal_pct));
        }
        Ok(())
    }
}

/// An ordered run of sensor records plus the GPS distance covered between
/// each consecutive pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    records: Vec<SensorRecord>,
    step_distance_m: Vec<f64>,
}

impl Trace {
    /// Validates the records and computes step distances. Row numbers in
    /// errors are 1-based record indices.
    pub fn new(records: Vec<SensorRecord>) -> Result<Self> {
        if records.len() < 2 {
            return Err(Error::invalid("trace requires ≥ 2 records"));
        }
        for (i, r) in records.iter().enumerate() {
            r.validate()
                .map_err(|m| Error::invalid(format!("row {}: {m}", i + 1)))?;
            if i > 0 && r.timestamp_s <= records[i - 1].timestamp_s {
                return Err(Error::invalid(format!(
                    "row {}: timestamp {} not after {}",
                    i + 1,
                    r.timestamp_s,
                    records[i - 1].timestamp_s
                )));
            }
        }
        let step_distance_m = step_distances(&records);
        Ok(Trace {
            records,
            step_distance_m,
        })
    }

    pub fn records(&self) -> &[SensorRecord] {
        &self.records
    }

    /// `step_distance_m()[t]` is the distance between records `t` and `t + 1`.
    pub fn step_distance_m(&self) -> &[f64] {
        &self.step_distance_m
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn steps(&self) -> usize {
        self.step_distance_m.len()
    }

    pub fn into_records(self) -> Vec<SensorRecord> {
        self.records
    }
}

fn step_distances(records: &[SensorRecord]) -> Vec<f64> {
    records
        .windows(2)
        .map(|w| haversine_unchecked(w[0].position, w[1].position, EARTH_RADIUS_M))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(t: f64, lat: f64) -> SensorRecord {
        SensorRecord {
            timestamp_s: t,
            position: GeoPoint {
                lat_deg: lat,
                lon_deg: -122.077,
            },
            speed_fps: 0.0,
            steer_deg: -57.8,
            pedal_pct: 0.0,
        }
    }

    #[test]
    fn step_distances_follow_records() {
        let t = Trace::new(vec![
            rec(0.0, 37.393),
            rec(0.01, 37.3939),
            rec(0.02, 37.3939),
        ])
        .unwrap();
        assert_eq!(t.steps(), 2);
        let oracle = 0.0009f64.to_radians() * EARTH_RADIUS_M;
        assert!((t.step_distance_m()[0] - oracle).abs() / oracle < 1e-6);
        assert_eq!(t.step_distance_m()[1], 0.0);
    }

    #[test]
    fn rejects_short_and_unordered_traces() {
        let err = Trace::new(vec![rec(0.0, 37.0)]).unwrap_err();
        assert!(err.to_string().contains("trace requires ≥ 2 records"));
        let err = Trace::new(vec![rec(0.0, 37.0), rec(1.0, 37.0), rec(0.5, 37.0)]).unwrap_err();
        assert!(err.to_string().contains("row 3"), "{err}");
    }

    #[test]
    fn rejects_invalid_channels() {
        let mut bad = rec(1.0, 37.0);
        bad.pedal_pct = 120.0;
        assert!(Trace::new(vec![rec(0.0, 37.0), bad]).is_err());
        let mut bad = rec(1.0, 37.0);
        bad.speed_fps = -1.0;
        assert!(Trace::new(vec![rec(0.0, 37.0), bad]).is_err());
    }
}
