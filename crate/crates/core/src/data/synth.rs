use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{SensorRecord, Trace, FEET_TO_METERS};
use crate::error::{Error, Result};
use crate::geo::{wrap_lon, GeoPoint, EARTH_RADIUS_M};

/// Driving profile for the synthetic trace generator.
///
/// The vehicle follows a kinematic bicycle model: pedal position drives
/// longitudinal acceleration against linear drag, steering wheel angle drives
/// the yaw rate. Pedal and steering follow two-tone sinusoids with seeded
/// random phases plus a bounded random walk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub origin: GeoPoint,
    pub start_time_s: f64,
    pub rng_seed: u64,

    pub initial_speed_mps: f64,
    pub initial_heading_deg: f64,
    pub max_speed_mps: f64,
    /// Acceleration at 100 % pedal, m/s².
    pub pedal_gain_mps2: f64,
    /// Linear drag coefficient, 1/s.
    pub drag_per_s: f64,

    pub pedal_mean_pct: f64,
    pub pedal_amplitude_pct: f64,
    pub pedal_period_s: f64,
    /// Per-second standard deviation of the pedal random walk.
    pub pedal_walk_pct: f64,

    pub steer_amplitude_deg: f64,
    pub steer_period_s: f64,
    pub steer_walk_deg: f64,
    pub steering_ratio: f64,
    pub wheelbase_m: f64,

    /// Standard deviation of horizontal GPS error, meters.
    pub gps_noise_m: f64,
    /// Standard deviation of CAN speed error, ft/s.
    pub speed_noise_fps: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            duration_s: 600.0,
            sample_rate_hz: 100.0,
            origin: GeoPoint {
                lat_deg: 37.393,
                lon_deg: -122.077,
            },
            start_time_s: 1_488_224_209.427_14,
            rng_seed: 0,
            initial_speed_mps: 8.0,
            initial_heading_deg: 0.0,
            max_speed_mps: 30.0,
            pedal_gain_mps2: 3.0,
            drag_per_s: 0.1,
            pedal_mean_pct: 40.0,
            pedal_amplitude_pct: 25.0,
            pedal_period_s: 45.0,
            pedal_walk_pct: 3.0,
            steer_amplitude_deg: 60.0,
            steer_period_s: 30.0,
            steer_walk_deg: 4.0,
            steering_ratio: 15.0,
            wheelbase_m: 2.7,
            gps_noise_m: 0.0,
            speed_noise_fps: 0.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("duration_s", self.duration_s),
            ("sample_rate_hz", self.sample_rate_hz),
            ("max_speed_mps", self.max_speed_mps),
            ("pedal_period_s", self.pedal_period_s),
            ("steer_period_s", self.steer_period_s),
            ("steering_ratio", self.steering_ratio),
            ("wheelbase_m", self.wheelbase_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!(
                    "synth: {name} must be > 0, got {v}"
                )));
            }
        }
        let non_negative = [
            ("initial_speed_mps", self.initial_speed_mps),
            ("pedal_gain_mps2", self.pedal_gain_mps2),
            ("drag_per_s", self.drag_per_s),
            ("pedal_amplitude_pct", self.pedal_amplitude_pct),
            ("pedal_walk_pct", self.pedal_walk_pct),
            ("steer_walk_deg", self.steer_walk_deg),
            ("gps_noise_m", self.gps_noise_m),
            ("speed_noise_fps", self.speed_noise_fps),
        ];
        for (name, v) in non_negative {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "synth: {name} must be >= 0, got {v}"
                )));
            }
        }
        if self.initial_speed_mps > self.max_speed_mps {
            return Err(Error::invalid("synth: initial speed exceeds max speed"));
        }
        if !(0.0..=100.0).contains(&self.pedal_mean_pct) {
            return Err(Error::invalid("synth: pedal_mean_pct outside [0, 100]"));
        }
        if !self.start_time_s.is_finite() || !self.steer_amplitude_deg.is_finite() {
            return Err(Error::invalid(
                "synth: non-finite start time or steering amplitude",
            ));
        }
        self.origin.validate()?;
        let n = self.record_count();
        if n < 2 {
            return Err(Error::invalid(format!(
                "synth: duration {} s at {} Hz yields fewer than 2 records",
                self.duration_s, self.sample_rate_hz
            )));
        }
        Ok(())
    }

    pub fn record_count(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize + 1
    }
}

/// Generates a kinematically consistent clean trace. Identical configs give
/// bit-identical traces.
pub fn generate_synthetic_trace(cfg: &SynthConfig) -> Result<Trace> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let n = cfg.record_count();
    let dt = 1.0 / cfg.sample_rate_hz;
    let two_pi = 2.0 * PI;

    let pedal_phase: [f64; 2] = [rng.gen_range(0.0..two_pi), rng.gen_range(0.0..two_pi)];
    let steer_phase: [f64; 2] = [rng.gen_range(0.0..two_pi), rng.gen_range(0.0..two_pi)];
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut speed = cfg.initial_speed_mps;
    let mut heading = cfg.initial_heading_deg.to_radians();
    let mut lat = cfg.origin.lat_deg.to_radians();
    let mut lon = cfg.origin.lon_deg.to_radians();
    let mut pedal_walk = 0.0;
    let mut steer_walk = 0.0;
    let walk_scale = dt.sqrt();

    let mut records = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * dt;
        let pedal = (cfg.pedal_mean_pct
            + cfg.pedal_amplitude_pct
                * (0.7 * (two_pi * t / cfg.pedal_period_s + pedal_phase[0]).sin()
                    + 0.3 * (two_pi * t / (0.37 * cfg.pedal_period_s) + pedal_phase[1]).sin())
            + pedal_walk)
            .clamp(0.0, 100.0);
        let steer = cfg.steer_amplitude_deg
            * (0.8 * (two_pi * t / cfg.steer_period_s + steer_phase[0]).sin()
                + 0.2 * (two_pi * t / (0.29 * cfg.steer_period_s) + steer_phase[1]).sin())
            + steer_walk;

        let speed_meas = if cfg.speed_noise_fps > 0.0 {
            (speed / FEET_TO_METERS + cfg.speed_noise_fps * unit.sample(&mut rng)).max(0.0)
        } else {
            speed / FEET_TO_METERS
        };
        let position = if cfg.gps_noise_m > 0.0 {
            let north = cfg.gps_noise_m * unit.sample(&mut rng);
            let east = cfg.gps_noise_m * unit.sample(&mut rng);
            offset(lat, lon, north, east)
        } else {
            (lat, lon)
        };
        records.push(SensorRecord {
            timestamp_s: cfg.start_time_s + t,
            position: GeoPoint {
                lat_deg: position.0.to_degrees(),
                lon_deg: wrap_lon(position.1.to_degrees()),
            },
            speed_fps: speed_meas,
            steer_deg: steer,
            pedal_pct: pedal,
        });

        // advance the true state to the next sample
        let accel = cfg.pedal_gain_mps2 * pedal / 100.0 - cfg.drag_per_s * speed;
        let next_speed = (speed + accel * dt).clamp(0.0, cfg.max_speed_mps);
        let ds = 0.5 * (speed + next_speed) * dt;
        let yaw_rate = 0.5 * (speed + next_speed) * (steer.to_radians() / cfg.steering_ratio).tan()
            / cfg.wheelbase_m;
        let mid_heading = heading + 0.5 * yaw_rate * dt;
        (lat, lon) = offset(lat, lon, ds * mid_heading.cos(), ds * mid_heading.sin());
        heading += yaw_rate * dt;
        speed = next_speed;

        if cfg.pedal_walk_pct > 0.0 {
            pedal_walk = (pedal_walk + cfg.pedal_walk_pct * walk_scale * unit.sample(&mut rng))
                .clamp(-cfg.pedal_amplitude_pct, cfg.pedal_amplitude_pct);
        }
        if cfg.steer_walk_deg > 0.0 {
            let bound = cfg.steer_amplitude_deg.abs().max(1.0);
            steer_walk = (steer_walk + cfg.steer_walk_deg * walk_scale * unit.sample(&mut rng))
                .clamp(-bound, bound);
        }
    }
    Trace::new(records)
}

/// Moves (lat, lon) in radians by small north/east displacements in meters
/// along the local meridian and parallel.
fn offset(lat: f64, lon: f64, north_m: f64, east_m: f64) -> (f64, f64) {
    let new_lat = lat + north_m / EARTH_RADIUS_M;
    let mid_lat = 0.5 * (lat + new_lat);
    (new_lat, lon + east_m / (EARTH_RADIUS_M * mid_lat.cos()))
}
