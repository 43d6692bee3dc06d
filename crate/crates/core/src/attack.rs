//! Location-shift spoofing attacks and labeled scenario sets.
//!
//! An attack moves every GPS fix from its onset record onward by a rigid
//! rotation of the sphere, so the spoofed route mirrors the real one and the
//! only anomaly in the step-distance series is the jump at the onset.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Trace;
use crate::error::{Error, Result};
use crate::geo::{destination, EarthModel, SphereRotation};

pub const MIN_SHIFT_M: f64 = 50.0;
pub const MAX_SHIFT_M: f64 = 180.0;

/// Where and how far the GPS position is shifted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackSpec {
    /// First record reporting the shifted position.
    pub onset_index: usize,
    pub shift_m: f64,
    /// Direction of the displacement, clockwise from north.
    pub shift_bearing_deg: f64,
}

impl AttackSpec {
    pub fn validate(&self, trace_len: usize) -> Result<()> {
        if self.onset_index == 0 || self.onset_index >= trace_len {
            return Err(Error::invalid(format!(
                "attack onset {} outside (0, {trace_len})",
                self.onset_index
            )));
        }
        if !(MIN_SHIFT_M..=MAX_SHIFT_M).contains(&self.shift_m) {
            return Err(Error::invalid(format!(
                "attack shift {} m outside [{MIN_SHIFT_M}, {MAX_SHIFT_M}]",
                self.shift_m
            )));
        }
        if !self.shift_bearing_deg.is_finite() {
            return Err(Error::invalid("attack bearing is not finite"));
        }
        Ok(())
    }

    /// Index of the step whose distance spans the discontinuity.
    pub fn onset_step(&self) -> usize {
        self.onset_index - 1
    }
}

/// Per-step ground truth: `true` where the GPS fix jumps to a spoofed
/// position.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelSeries {
    flags: Vec<bool>,
}

impl LabelSeries {
    pub fn from_flags(flags: Vec<bool>) -> Self {
        LabelSeries { flags }
    }

    pub fn clean(steps: usize) -> Self {
        LabelSeries {
            flags: vec![false; steps],
        }
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn len(&self) -> usize {
        self.flags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flags.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Applies one attack. See [`inject_attacks`].
pub fn inject_attack(trace: &Trace, spec: &AttackSpec) -> Result<(Trace, LabelSeries)> {
    inject_attacks(trace, std::slice::from_ref(spec))
}

/// Applies attacks in onset order. Each one rotates the remaining (already
/// spoofed) suffix so its onset record lands `shift_m` away along the bearing;
/// offsets therefore accumulate. Only the onset steps are labeled.
pub fn inject_attacks(trace: &Trace, specs: &[AttackSpec]) -> Result<(Trace, LabelSeries)> {
    let mut sorted = specs.to_vec();
    sorted.sort_by_key(|s| s.onset_index);
    for (i, s) in sorted.iter().enumerate() {
        s.validate(trace.len())?;
        if i > 0 && sorted[i - 1].onset_index == s.onset_index {
            return Err(Error::invalid(format!(
                "two attacks share onset {}",
                s.onset_index
            )));
        }
    }

    let mut labels = LabelSeries::clean(trace.steps());
    if sorted.is_empty() {
        return Ok((trace.clone(), labels));
    }

    let earth = EarthModel::default();
    let mut records = trace.records().to_vec();
    for s in &sorted {
        let anchor = records[s.onset_index].position;
        let target = destination(anchor, s.shift_bearing_deg, s.shift_m, earth);
        let rotation = SphereRotation::between(anchor, target);
        for r in &mut records[s.onset_index..] {
            r.position = rotation.apply(r.position);
        }
        labels.flags[s.onset_step()] = true;
    }
    Ok((Trace::new(records)?, labels))
}

/// Knobs for generating a scenario set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AttackGenConfig {
    pub scenario_count: usize,
    /// Attacks in scenario 1.
    pub max_attacks: usize,
    /// Attacks in the last scenario.
    pub min_attacks: usize,
    pub min_shift_m: f64,
    pub max_shift_m: f64,
    /// Minimum number of records between onsets, and between an onset and
    /// either end of the trace.
    pub min_gap: usize,
}

impl Default for AttackGenConfig {
    fn default() -> Self {
        AttackGenConfig {
            scenario_count: 10,
            max_attacks: 80,
            min_attacks: 8,
            min_shift_m: MIN_SHIFT_M,
            max_shift_m: MAX_SHIFT_M,
            min_gap: 100,
        }
    }
}

impl AttackGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenario_count < 2 {
            return Err(Error::invalid("need at least 2 scenarios"));
        }
        if self.min_attacks == 0 {
            return Err(Error::invalid("every scenario needs at least one attack"));
        }
        if !(MIN_SHIFT_M <= self.min_shift_m
            && self.min_shift_m <= self.max_shift_m
            && self.max_shift_m <= MAX_SHIFT_M)
        {
            return Err(Error::invalid(format!(
                "shift range [{}, {}] must lie within [{MIN_SHIFT_M}, {MAX_SHIFT_M}]",
                self.min_shift_m, self.max_shift_m
            )));
        }
        if self.min_gap < 2 {
            return Err(Error::invalid("min_gap must be at least 2"));
        }
        let counts = self.attack_counts();
        if counts.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::invalid(format!(
                "attack counts {counts:?} are not strictly decreasing; widen [min_attacks, max_attacks]"
            )));
        }
        Ok(())
    }

    /// Attack count per scenario, linearly spaced from `max_attacks` down to
    /// `min_attacks`.
    pub fn attack_counts(&self) -> Vec<usize> {
        let n = self.scenario_count;
        let span = self.max_attacks as f64 - self.min_attacks as f64;
        (0..n)
            .map(|i| (self.max_attacks as f64 - span * i as f64 / (n - 1) as f64).round() as usize)
            .collect()
    }
}

/// Extent of a spoofed stretch, in record indices (`end` exclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpoofedSegment {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// 1-based scenario number.
    pub id: usize,
    pub attacks: Vec<AttackSpec>,
    /// Spoofed extent of each attack: from its onset to the end of the trace,
    /// since offsets persist.
    pub segments: Vec<SpoofedSegment>,
    pub trace: Trace,
    pub labels: LabelSeries,
}

impl Scenario {
    /// Alternative ground truth marking every step inside a spoofed segment.
    pub fn segment_labels(&self) -> LabelSeries {
        let mut flags = vec![false; self.trace.steps()];
        for seg in &self.segments {
            for f in &mut flags[seg.start - 1..seg.end - 1] {
                *f = true;
            }
        }
        LabelSeries::from_flags(flags)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub rng_seed: u64,
    pub scenarios: Vec<Scenario>,
}

/// Builds the attack scenarios from one clean trace. Scenario `i` carries
/// the `i`-th entry of [`AttackGenConfig::attack_counts`]; onsets are placed
/// uniformly subject to the minimum gap, magnitudes are uniform in the shift
/// range and bearings uniform in [0, 360).
pub fn generate_scenario_set(
    trace: &Trace,
    cfg: &AttackGenConfig,
    rng_seed: u64,
) -> Result<ScenarioSet> {
    cfg.validate()?;
    let counts = cfg.attack_counts();
    let scenarios = counts
        .iter()
        .enumerate()
        .map(|(i, &count)| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(i as u64 + 1);
            let attacks = draw_attacks(trace.len(), count, cfg, &mut rng)?;
            let (spoofed, labels) = inject_attacks(trace, &attacks)?;
            let segments = attacks
                .iter()
                .map(|a| SpoofedSegment {
                    start: a.onset_index,
                    end: trace.len(),
                })
                .collect();
            Ok(Scenario {
                id: i + 1,
                attacks,
                segments,
                trace: spoofed,
                labels,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioSet {
        rng_seed,
        scenarios,
    })
}

fn draw_attacks(
    len: usize,
    count: usize,
    cfg: &AttackGenConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<AttackSpec>> {
    let gap = cfg.min_gap;
    let lo = gap;
    let hi = len.saturating_sub(1 + gap);
    let needed = (count - 1) * gap;
    if hi < lo || hi - lo < needed {
        return Err(Error::invalid(format!(
            "trace of {len} records is too short for {count} attacks spaced {gap} apart"
        )));
    }
    let slack = hi - lo - needed;
    let mut offsets: Vec<usize> = (0..count).map(|_| rng.gen_range(0..=slack)).collect();
    offsets.sort_unstable();
    let attacks = offsets
        .into_iter()
        .enumerate()
        .map(|(j, off)| AttackSpec {
            onset_index: lo + off + j * gap,
            shift_m: rng.gen_range(cfg.min_shift_m..=cfg.max_shift_m),
            shift_bearing_deg: rng.gen_range(0.0..360.0),
        })
        .collect();
    Ok(attacks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_trace, SensorRecord, SynthConfig};
    use crate::geo::{haversine_distance, GeoPoint};

    fn stationary(n: usize) -> Trace {
        let records = (0..n)
            .map(|i| SensorRecord {
                timestamp_s: i as f64 * 0.01,
                position: GeoPoint {
                    lat_deg: 37.393,
                    lon_deg: -122.077,
                },
                speed_fps: 0.0,
                steer_deg: 0.0,
                pedal_pct: 0.0,
            })
            .collect();
        Trace::new(records).unwrap()
    }

    /// Moves north 1 m per step.
    fn creeping(n: usize) -> Trace {
        let records = (0..n)
            .map(|i| SensorRecord {
                timestamp_s: i as f64 * 0.01,
                position: GeoPoint {
                    lat_deg: 37.393 + (i as f64 / crate::geo::EARTH_RADIUS_M).to_degrees(),
                    lon_deg: -122.077,
                },
                speed_fps: 100.0 / 0.3048,
                steer_deg: 0.0,
                pedal_pct: 20.0,
            })
            .collect();
        Trace::new(records).unwrap()
    }

    #[test]
    fn shift_on_stationary_trace_isolates_onset() {
        let t = stationary(50);
        let spec = AttackSpec {
            onset_index: 20,
            shift_m: 100.0,
            shift_bearing_deg: 30.0,
        };
        let (s, labels) = inject_attack(&t, &spec).unwrap();
        for (i, &d) in s.step_distance_m().iter().enumerate() {
            if i == 19 {
                assert!((d - 100.0).abs() < 1e-6, "{d}");
            } else {
                assert!(d < 1e-6, "step {i}: {d}");
            }
        }
        assert_eq!(labels.positives(), 1);
        assert!(labels.flags()[19]);
    }

    #[test]
    fn onset_distance_matches_direct_recomputation() {
        let t = creeping(30);
        let spec = AttackSpec {
            onset_index: 10,
            shift_m: 50.0,
            shift_bearing_deg: 90.0,
        };
        let (s, _) = inject_attack(&t, &spec).unwrap();
        let d = s.step_distance_m()[9];
        assert!((49.0..=51.0).contains(&d), "{d}");

        // independent route: shift the onset fix with the destination formula
        // and measure from the untouched previous fix
        let moved = destination(t.records()[10].position, 90.0, 50.0, EarthModel::default());
        let oracle =
            haversine_distance(t.records()[9].position, moved, EarthModel::default()).unwrap();
        assert!((d - oracle).abs() < 1e-6, "{d} vs {oracle}");
    }

    #[test]
    fn clean_steps_keep_their_distance() {
        let t = generate_synthetic_trace(&SynthConfig {
            duration_s: 20.0,
            ..SynthConfig::default()
        })
        .unwrap();
        let specs = [
            AttackSpec {
                onset_index: 300,
                shift_m: 180.0,
                shift_bearing_deg: 10.0,
            },
            AttackSpec {
                onset_index: 1200,
                shift_m: 75.0,
                shift_bearing_deg: 250.0,
            },
        ];
        let (s, labels) = inject_attacks(&t, &specs).unwrap();
        assert_eq!(labels.positives(), 2);
        for (i, (&clean, &spoofed)) in t
            .step_distance_m()
            .iter()
            .zip(s.step_distance_m())
            .enumerate()
        {
            if labels.flags()[i] {
                let shift = specs.iter().find(|a| a.onset_step() == i).unwrap().shift_m;
                assert!(spoofed >= shift - clean - 1e-9);
            } else {
                assert!(
                    (clean - spoofed).abs() < 1e-6,
                    "step {i}: {clean} vs {spoofed}"
                );
            }
        }
    }

    #[test]
    fn no_attacks_is_identity() {
        let t = creeping(20);
        let (s, labels) = inject_attacks(&t, &[]).unwrap();
        assert_eq!(s, t);
        assert_eq!(labels.positives(), 0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let t = stationary(20);
        let mk = |onset, shift| AttackSpec {
            onset_index: onset,
            shift_m: shift,
            shift_bearing_deg: 0.0,
        };
        assert!(inject_attack(&t, &mk(0, 100.0)).is_err());
        assert!(inject_attack(&t, &mk(20, 100.0)).is_err());
        assert!(inject_attack(&t, &mk(5, 49.9)).is_err());
        assert!(inject_attack(&t, &mk(5, 180.1)).is_err());
    }

    #[test]
    fn scenario_counts_decrease() {
        let cfg = AttackGenConfig {
            max_attacks: 10,
            min_attacks: 1,
            ..AttackGenConfig::default()
        };
        assert_eq!(cfg.attack_counts(), (1..=10).rev().collect::<Vec<_>>());
        let bad = AttackGenConfig {
            max_attacks: 5,
            min_attacks: 1,
            ..AttackGenConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn scenario_set_shape_and_determinism() {
        let t = stationary(2_000);
        let cfg = AttackGenConfig {
            max_attacks: 10,
            min_attacks: 1,
            ..AttackGenConfig::default()
        };
        let set = generate_scenario_set(&t, &cfg, 5).unwrap();
        assert_eq!(set.scenarios.len(), 10);
        assert_eq!(set.scenarios[0].attacks.len(), 10);
        assert_eq!(set.scenarios[9].attacks.len(), 1);
        for sc in &set.scenarios {
            assert_eq!(sc.labels.positives(), sc.attacks.len());
            for w in sc.attacks.windows(2) {
                assert!(w[1].onset_index - w[0].onset_index >= cfg.min_gap);
            }
            for a in &sc.attacks {
                assert!((50.0..=180.0).contains(&a.shift_m));
                assert!((0.0..360.0).contains(&a.shift_bearing_deg));
                assert!(a.onset_index >= cfg.min_gap && a.onset_index < t.len() - cfg.min_gap);
            }
        }
        assert_eq!(set, generate_scenario_set(&t, &cfg, 5).unwrap());
        assert_ne!(set, generate_scenario_set(&t, &cfg, 6).unwrap());
    }

    #[test]
    fn short_trace_cannot_host_scenarios() {
        let err =
            generate_scenario_set(&stationary(500), &AttackGenConfig::default(), 0).unwrap_err();
        assert!(err.to_string().contains("too short"), "{err}");
    }

    #[test]
    fn segment_labels_cover_suffix() {
        let t = stationary(400);
        let cfg = AttackGenConfig {
            max_attacks: 2,
            min_attacks: 1,
            scenario_count: 2,
            ..AttackGenConfig::default()
        };
        let set = generate_scenario_set(&t, &cfg, 1).unwrap();
        let sc = &set.scenarios[1];
        let seg = sc.segment_labels();
        let first = sc.attacks[0].onset_step();
        assert!(seg.flags()[..first].iter().all(|f| !f));
        assert!(seg.flags()[first..].iter().all(|&f| f));
    }
}
