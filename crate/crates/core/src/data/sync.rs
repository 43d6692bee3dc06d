use super::{SensorRecord, Trace};
use crate::error::{Error, Result};
use crate::geo::GeoPoint;

/// A timestamped GPS position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpsFix {
    pub timestamp_s: f64,
    pub position: GeoPoint,
}

/// A timestamped CAN triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CanSample {
    pub timestamp_s: f64,
    pub speed_fps: f64,
    pub steer_deg: f64,
    pub pedal_pct: f64,
}

/// Resamples the CAN stream at GPS timestamps.
///
/// GPS time is the reference clock. Each GPS fix inside the CAN stream's
/// time span takes the nearest CAN sample (ties go to the earlier sample);
/// fixes outside the span are dropped.
pub fn synchronize(gps: &[GpsFix], can: &[CanSample]) -> Result<Trace> {
    if gps.is_empty() || can.is_empty() {
        return Err(Error::invalid("both GPS and CAN streams must be non-empty"));
    }
    check_sorted(gps.iter().map(|g| g.timestamp_s), "GPS")?;
    check_sorted(can.iter().map(|c| c.timestamp_s), "CAN")?;

    let first = can[0].timestamp_s;
    let last = can[can.len() - 1].timestamp_s;
    let mut records = Vec::new();
    for fix in gps {
        let t = fix.timestamp_s;
        if t < first || t > last {
            continue;
        }
        let c = &can[nearest_index(can, t)];
        records.push(SensorRecord {
            timestamp_s: t,
            position: fix.position,
            speed_fps: c.speed_fps,
            steer_deg: c.steer_deg,
            pedal_pct: c.pedal_pct,
        });
    }
    if records.is_empty() {
        return Err(Error::invalid("GPS and CAN streams do not overlap in time"));
    }
    Trace::new(records)
}

fn nearest_index(can: &[CanSample], t: f64) -> usize {
    // first sample at or after t
    let hi = can.partition_point(|c| c.timestamp_s < t);
    if hi == 0 {
        return 0;
    }
    if hi == can.len() {
        return can.len() - 1;
    }
    let lo = hi - 1;
    if t - can[lo].timestamp_s <= can[hi].timestamp_s - t {
        lo
    } else {
        hi
    }
}

fn check_sorted(ts: impl Iterator<Item = f64>, stream: &str) -> Result<()> {
    let mut prev = f64::NEG_INFINITY;
    for (i, t) in ts.enumerate() {
        if !t.is_finite() || t <= prev {
            return Err(Error::invalid(format!(
                "{stream} stream: timestamp at index {i} is not finite and increasing"
            )));
        }
        prev = t;
    }
    Ok(())
}
