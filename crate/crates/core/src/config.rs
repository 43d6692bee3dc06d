//! Run configuration: one JSON document covering every pipeline stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attack::AttackGenConfig;
use crate::data::SynthConfig;
use crate::error::{Error, Result};
use crate::eval::log_grid;
use crate::io::read_json;
use crate::mlp::TrainConfig;
use crate::rl::QLearningConfig;

/// Directories, relative to the output root unless absolute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PathsConfig {
    pub traces: PathBuf,
    pub models: PathBuf,
    pub reports: PathBuf,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            traces: "traces".into(),
            models: "models".into(),
            reports: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Scenario whose DD series trains the agent; it is left out of the
    /// report.
    pub train_scenario: usize,
    pub grid_min_m: f64,
    pub grid_max_m: f64,
    pub grid_points: usize,
    /// Flags closer than this many steps count as one event; 0 disables.
    pub merge_window: usize,
    /// Let the agent keep moving the threshold while detecting.
    pub online_adaptation: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            train_scenario: 2,
            grid_min_m: 0.01,
            grid_max_m: 200.0,
            grid_points: 200,
            merge_window: 0,
            online_adaptation: false,
        }
    }
}

impl EvalConfig {
    pub fn grid(&self) -> Result<Vec<f64>> {
        log_grid(self.grid_min_m, self.grid_max_m, self.grid_points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Master seed. Each stage derives its own seed from it, overriding the
    /// `rng_seed` fields of the nested sections.
    pub rng_seed: u64,
    pub paths: PathsConfig,
    pub synth: SynthConfig,
    pub attacks: AttackGenConfig,
    pub predictor: TrainConfig,
    pub agent: QLearningConfig,
    pub eval: EvalConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            rng_seed: 42,
            paths: PathsConfig::default(),
            synth: SynthConfig::default(),
            attacks: AttackGenConfig::default(),
            predictor: TrainConfig::default(),
            agent: QLearningConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Synth,
    Inject,
    Predictor,
    Agent,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    pub fn stage_seed(&self, stage: Stage) -> u64 {
        self.rng_seed.wrapping_add(stage as u64)
    }

    /// Copies the derived stage seeds into the nested sections.
    pub fn with_stage_seeds(mut self) -> Self {
        self.synth.rng_seed = self.stage_seed(Stage::Synth);
        self.predictor.rng_seed = self.stage_seed(Stage::Predictor);
        self.agent.rng_seed = self.stage_seed(Stage::Agent);
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.attacks.validate()?;
        self.predictor.validate()?;
        if let Some(t) = self.agent.initial_threshold_m {
            if !(t.is_finite() && t >= 0.0) {
                return Err(Error::invalid(format!(
                    "initial threshold {t} must be >= 0"
                )));
            }
        }
        let probe = QLearningConfig {
            initial_threshold_m: None,
            ..self.agent.clone()
        };
        probe.validate()?;
        if !(1..=self.attacks.scenario_count).contains(&self.eval.train_scenario) {
            return Err(Error::invalid(format!(
                "training scenario {} outside 1..={}",
                self.eval.train_scenario, self.attacks.scenario_count
            )));
        }
        self.eval.grid()?;
        Ok(())
    }
}
