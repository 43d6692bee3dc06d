use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    greedy_action, q_update, select_action, DdSample, QLearningConfig, ReplayBuffer, ThresholdEnv,
    ThresholdState, Transition, QNET_LAYERS,
};
use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::mlp::{adam_step, AdamState, Gradients, MlpNetwork, ModelFile, Workspace};

pub const ROLE: &str = "qnet";

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedAgent {
    pub qnet: MlpNetwork,
    pub threshold: ThresholdState,
    /// Total reward per episode. The last entry covers a partial pass when
    /// the step budget ends mid-series.
    pub reward_history: Vec<f64>,
    pub episode_lengths: Vec<usize>,
}

impl TrainedAgent {
    /// Greedy action for the agent's current threshold and a DD value.
    pub fn greedy(&self, cfg: &QLearningConfig, dd_m: f64) -> Result<super::Action> {
        let input = scaled_input(cfg, self.threshold, dd_m);
        Ok(greedy_action(&self.qnet.forward(&input)?))
    }
}

/// Serialized agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentFile {
    pub threshold_m: f64,
    pub qnet: ModelFile,
    pub config: QLearningConfig,
    pub reward_history: Vec<f64>,
    #[serde(default)]
    pub episode_lengths: Vec<usize>,
}

impl AgentFile {
    pub fn new(agent: &TrainedAgent, config: &QLearningConfig) -> Self {
        AgentFile {
            threshold_m: agent.threshold.threshold_m,
            qnet: ModelFile::from_network(&agent.qnet, Some(ROLE), None),
            config: config.clone(),
            reward_history: agent.reward_history.clone(),
            episode_lengths: agent.episode_lengths.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file: AgentFile = read_json(path)?;
        let bad = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        if !(file.threshold_m.is_finite() && file.threshold_m >= 0.0) {
            return Err(bad(format!(
                "threshold {} is not a valid distance",
                file.threshold_m
            )));
        }
        let net = file.qnet.to_network().map_err(|e| bad(e.to_string()))?;
        if net.layer_sizes() != QNET_LAYERS {
            return Err(bad(format!("Q-network layers {:?}", net.layer_sizes())));
        }
        Ok(file)
    }

    pub fn into_agent(self) -> Result<TrainedAgent> {
        Ok(TrainedAgent {
            qnet: self.qnet.to_network()?,
            threshold: ThresholdState {
                threshold_m: self.threshold_m,
            },
            reward_history: self.reward_history,
            episode_lengths: self.episode_lengths,
        })
    }
}

// Thresholds and DDs span up to `threshold_max_m`; the network sees them
// scaled into [0, 1].
fn scaled_input(cfg: &QLearningConfig, state: ThresholdState, dd_m: f64) -> [f64; 1] {
    let [x] = cfg.q_features(state, super::EnvObservation { dd_m });
    [(x / cfg.threshold_max_m).min(1.0)]
}

fn check_series(series: &[DdSample]) -> Result<()> {
    if let Some((i, s)) = series
        .iter()
        .enumerate()
        .find(|(_, s)| !(s.dd_m.is_finite() && s.dd_m >= 0.0))
    {
        return Err(Error::invalid(format!(
            "DD sample {i} is {} (must be a finite distance)",
            s.dd_m
        )));
    }
    let attacks = series.iter().filter(|s| s.attack).count();
    if attacks == 0 || attacks == series.len() {
        return Err(Error::invalid(format!(
            "training series needs both attack and clean samples ({attacks} of {} are attacks)",
            series.len()
        )));
    }
    Ok(())
}

/// Deep Q-learning over a labeled DD series. Targets for the taken action
/// follow the Q-update rule with the bootstrap term taken from a target
/// network synced every `target_sync_steps`; the other outputs are trained
/// toward their own current values, so they receive no gradient.
pub fn train_agent(series: &[DdSample], cfg: &QLearningConfig) -> Result<TrainedAgent> {
    cfg.validate()?;
    check_series(series)?;
    let initial = cfg
        .initial_threshold_m
        .ok_or_else(|| Error::invalid("initial threshold is not set"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut qnet = MlpNetwork::new(&QNET_LAYERS, cfg.rng_seed)?;
    let mut target = qnet.clone();
    let mut adam = AdamState::new(&qnet, cfg.adam);
    let mut grads = Gradients::zeros_like(&qnet);
    let mut ws = Workspace::new(&qnet);
    let mut replay = ReplayBuffer::new(cfg.replay_capacity);

    let mut env = ThresholdEnv::new(
        series,
        ThresholdState {
            threshold_m: initial,
        },
        cfg,
    );
    let mut reward_history = Vec::new();
    let mut episode_lengths = Vec::new();
    let mut episode_reward = 0.0;
    let mut episode_len = 0;

    for step in 0..cfg.total_steps {
        let input = scaled_input(cfg, env.state(), env.observation().dd_m);
        let action = select_action(&qnet, &input, cfg.epsilon_at(step), &mut rng)?;
        let out = env.step(action);
        let next_input = scaled_input(cfg, out.next_state, out.observation.dd_m);
        replay.push(Transition {
            input,
            action,
            reward: out.reward,
            next_input,
        });

        episode_reward += out.reward;
        episode_len += 1;
        if out.episode_end {
            reward_history.push(episode_reward);
            episode_lengths.push(episode_len);
            episode_reward = 0.0;
            episode_len = 0;
        }

        if replay.len() >= cfg.batch_size {
            grads.fill_zero();
            let scale = 1.0 / cfg.batch_size as f64;
            for t in replay.sample(cfg.batch_size, &mut rng) {
                let mut y = qnet.forward(&t.input)?;
                let next_max = target
                    .forward(&t.next_input)?
                    .into_iter()
                    .fold(f64::NEG_INFINITY, f64::max);
                let a = t.action.index();
                y[a] = q_update(y[a], next_max, t.reward, cfg.alpha, cfg.gamma);
                qnet.accumulate(&t.input, &y, cfg.loss, scale, &mut grads, &mut ws);
            }
            adam_step(&mut qnet, &grads, &mut adam)?;
        }
        if (step + 1) % cfg.target_sync_steps == 0 {
            target = qnet.clone();
        }
    }
    if episode_len > 0 {
        reward_history.push(episode_reward);
        episode_lengths.push(episode_len);
    }

    Ok(TrainedAgent {
        qnet,
        threshold: env.state(),
        reward_history,
        episode_lengths,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Clean DDs in [0, 0.1], attacks in [50, 180], one attack per `period`.
    pub(crate) fn separable_series(len: usize, period: usize, seed: u64) -> Vec<DdSample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|i| {
                let attack = i % period == period / 2;
                let dd_m = if attack {
                    rng.gen_range(50.0..=180.0)
                } else {
                    rng.gen_range(0.0..=0.1)
                };
                DdSample { dd_m, attack }
            })
            .collect()
    }

    fn cfg() -> QLearningConfig {
        QLearningConfig {
            initial_threshold_m: Some(0.05),
            ..QLearningConfig::default()
        }
    }

    #[test]
    fn degenerate_series_rejected() {
        let clean = vec![
            DdSample {
                dd_m: 0.01,
                attack: false
            };
            10
        ];
        assert!(train_agent(&clean, &cfg()).is_err());
        let attacks = vec![
            DdSample {
                dd_m: 60.0,
                attack: true
            };
            10
        ];
        assert!(train_agent(&attacks, &cfg()).is_err());
        let mut bad = separable_series(10, 5, 0);
        bad[3].dd_m = f64::NAN;
        assert!(train_agent(&bad, &cfg()).is_err());
    }

    #[test]
    fn initial_threshold_required() {
        let series = separable_series(100, 10, 0);
        assert!(train_agent(&series, &QLearningConfig::default()).is_err());
    }

    #[test]
    fn history_covers_every_step() {
        let series = separable_series(300, 30, 1);
        let c = QLearningConfig {
            total_steps: 1000,
            ..cfg()
        };
        let agent = train_agent(&series, &c).unwrap();
        assert_eq!(agent.episode_lengths, vec![300, 300, 300, 100]);
        assert_eq!(agent.reward_history.len(), 4);
        let t = agent.threshold.threshold_m;
        assert!((0.0..=c.threshold_max_m).contains(&t));
    }

    #[test]
    fn agent_file_round_trip() {
        let series = separable_series(100, 10, 2);
        let c = QLearningConfig {
            total_steps: 200,
            ..cfg()
        };
        let agent = train_agent(&series, &c).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.json");
        AgentFile::new(&agent, &c).save(&path).unwrap();
        let file = AgentFile::load(&path).unwrap();
        assert_eq!(file.config, c);
        assert_eq!(file.into_agent().unwrap(), agent);
    }
}
