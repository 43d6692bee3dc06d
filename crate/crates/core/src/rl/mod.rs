//! Deep Q-learning agent that tunes the DD detection threshold.
//!
//! The environment replays a labeled DD series. Each step the agent raises,
//! lowers or keeps its threshold; the sample is flagged when its DD exceeds
//! the new threshold, and the agent earns the scheme's reward for agreeing
//! with the ground truth or its penalty otherwise.

mod agent;
mod env;
mod replay;

pub use agent::{train_agent, AgentFile, TrainedAgent};
pub use env::{env_step, DdSample, EnvObservation, StepOutcome, ThresholdEnv};
pub use replay::{ReplayBuffer, Transition};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mlp::{AdamConfig, Loss, MlpNetwork};

pub const QNET_LAYERS: [usize; 4] = [1, 24, 24, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    IncreaseThreshold = 0,
    DecreaseThreshold = 1,
    KeepThreshold = 2,
}

impl Action {
    pub const ALL: [Action; 3] = [
        Action::IncreaseThreshold,
        Action::DecreaseThreshold,
        Action::KeepThreshold,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }
}

/// The agent's state: the current detection threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    pub threshold_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardScheme {
    pub correct: f64,
    pub incorrect: f64,
}

impl Default for RewardScheme {
    fn default() -> Self {
        RewardScheme {
            correct: 1.0,
            incorrect: -100.0,
        }
    }
}

/// What the Q-network is fed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QInput {
    /// The current threshold (the agent's state).
    #[default]
    Threshold,
    /// The DD of the sample about to be scored.
    DifferentialDistance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QLearningConfig {
    /// Step size of the Q-value update; 1 makes the regression target the
    /// full bootstrapped return.
    pub alpha: f64,
    pub gamma: f64,
    /// Environment steps across all episodes.
    pub total_steps: usize,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    /// Share of `total_steps` over which epsilon decays linearly.
    pub epsilon_decay_fraction: f64,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub target_sync_steps: usize,
    pub threshold_step_m: f64,
    pub threshold_max_m: f64,
    /// Starting threshold; the pipeline fills this with the predictor's
    /// held-out maximum error when unset.
    pub initial_threshold_m: Option<f64>,
    pub rng_seed: u64,
    pub reward: RewardScheme,
    pub q_input: QInput,
    pub loss: Loss,
    pub adam: AdamConfig,
}

impl Default for QLearningConfig {
    fn default() -> Self {
        QLearningConfig {
            alpha: 1.0,
            gamma: 0.5,
            total_steps: 10_000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_fraction: 0.2,
            replay_capacity: 10_000,
            batch_size: 32,
            target_sync_steps: 500,
            threshold_step_m: 0.01,
            threshold_max_m: 200.0,
            initial_threshold_m: None,
            rng_seed: 0,
            reward: RewardScheme::default(),
            q_input: QInput::default(),
            loss: Loss::Mse,
            adam: AdamConfig::default(),
        }
    }
}

impl QLearningConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::invalid(m));
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return fail(format!("alpha {} not in (0, 1]", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return fail(format!("gamma {} not in [0, 1]", self.gamma));
        }
        if self.total_steps == 0
            || self.replay_capacity == 0
            || self.batch_size == 0
            || self.target_sync_steps == 0
        {
            return fail(
                "steps, replay capacity, batch size and sync period must be positive".into(),
            );
        }
        if !(self.threshold_step_m > 0.0 && self.threshold_step_m.is_finite()) {
            return fail(format!(
                "threshold step {} must be > 0",
                self.threshold_step_m
            ));
        }
        if !(self.threshold_max_m > 0.0 && self.threshold_max_m.is_finite()) {
            return fail(format!(
                "threshold max {} must be > 0",
                self.threshold_max_m
            ));
        }
        if let Some(t) = self.initial_threshold_m {
            if !(0.0..=self.threshold_max_m).contains(&t) {
                return fail(format!(
                    "initial threshold {t} outside [0, {}]",
                    self.threshold_max_m
                ));
            }
        }
        for e in [
            self.epsilon_start,
            self.epsilon_end,
            self.epsilon_decay_fraction,
        ] {
            if !(0.0..=1.0).contains(&e) {
                return fail("epsilon schedule values must lie in [0, 1]".into());
            }
        }
        if !(self.reward.correct > 0.0 && self.reward.incorrect < 0.0) {
            return fail(
                "reward for a correct call must be positive and the penalty negative".into(),
            );
        }
        self.adam.validate()
    }

    /// Linear decay from `epsilon_start` to `epsilon_end`, then constant.
    pub fn epsilon_at(&self, step: usize) -> f64 {
        let decay_steps = (self.epsilon_decay_fraction * self.total_steps as f64).round();
        if decay_steps <= 0.0 || step as f64 >= decay_steps {
            return self.epsilon_end;
        }
        let frac = step as f64 / decay_steps;
        self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
    }

    pub(crate) fn q_features(&self, state: ThresholdState, obs: EnvObservation) -> [f64; 1] {
        match self.q_input {
            QInput::Threshold => [state.threshold_m],
            QInput::DifferentialDistance => [obs.dd_m],
        }
    }
}

/// Q(s,a) + alpha * (r + gamma * max_a' Q(s',a') - Q(s,a)).
pub fn q_update(q_current: f64, q_next_max: f64, reward: f64, alpha: f64, gamma: f64) -> f64 {
    q_current + alpha * (reward + gamma * q_next_max - q_current)
}

/// Epsilon-greedy choice: a uniform random action with probability
/// `epsilon`, otherwise the arg-max Q-value (lowest index wins ties).
pub fn select_action<R: Rng + ?Sized>(
    qnet: &MlpNetwork,
    input: &[f64],
    epsilon: f64,
    rng: &mut R,
) -> Result<Action> {
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon {epsilon} not in [0, 1]")));
    }
    if rng.gen::<f64>() < epsilon {
        return Ok(Action::ALL[rng.gen_range(0..3)]);
    }
    Ok(greedy_action(&qnet.forward(input)?))
}

pub fn greedy_action(q_values: &[f64]) -> Action {
    let mut best = 0;
    for (i, &q) in q_values.iter().enumerate().skip(1) {
        if q > q_values[best] {
            best = i;
        }
    }
    Action::from_index(best).expect("three Q outputs")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net_with_outputs(q: [f64; 3]) -> MlpNetwork {
        let mut net = MlpNetwork::zeros(&QNET_LAYERS).unwrap();
        net.layers_mut()[2].biases.copy_from_slice(&q);
        net
    }

    #[test]
    fn q_update_cases() {
        assert_eq!(q_update(0.0, 123.0, 1.0, 1.0, 0.0), 1.0);
        let q = q_update(0.5, 2.0, 1.0, 0.1, 0.9);
        assert!((q - 0.73).abs() < 1e-12, "{q}");
        for (r, g) in [(1.0, 0.5), (-100.0, 0.99), (7.0, 0.0)] {
            assert_eq!(q_update(0.37, 5.0, r, 0.0, g), 0.37);
        }
    }

    #[test]
    fn greedy_picks_argmax() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = net_with_outputs([0.1, 0.9, 0.3]);
        assert_eq!(
            select_action(&net, &[0.0], 0.0, &mut rng).unwrap(),
            Action::DecreaseThreshold
        );
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = net_with_outputs([0.5, 0.5, 0.2]);
        assert_eq!(
            select_action(&net, &[0.0], 0.0, &mut rng).unwrap(),
            Action::IncreaseThreshold
        );
        assert_eq!(greedy_action(&[1.0, 2.0, 2.0]), Action::DecreaseThreshold);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let net = net_with_outputs([0.0, 0.0, 9.0]);
        let mut counts = [0usize; 3];
        let n = 10_000;
        for _ in 0..n {
            counts[select_action(&net, &[0.0], 1.0, &mut rng).unwrap().index()] += 1;
        }
        for c in counts {
            let freq = c as f64 / n as f64;
            assert!((freq - 1.0 / 3.0).abs() < 0.05, "{counts:?}");
        }
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = QLearningConfig::default();
        assert_eq!(cfg.epsilon_at(0), 1.0);
        assert!((cfg.epsilon_at(1000) - 0.525).abs() < 1e-12);
        assert_eq!(cfg.epsilon_at(2000), 0.05);
        assert_eq!(cfg.epsilon_at(9999), 0.05);
    }

    #[test]
    fn config_validation() {
        assert!(QLearningConfig::default().validate().is_ok());
        let bad = QLearningConfig {
            gamma: 1.5,
            ..QLearningConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = QLearningConfig {
            threshold_step_m: 0.0,
            ..QLearningConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
