use serde::{Deserialize, Serialize};

use super::{Action, QLearningConfig, RewardScheme, ThresholdState};

/// One labeled DD value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdSample {
    pub dd_m: f64,
    pub attack: bool,
}

/// What the environment shows the agent: the DD of the next sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvObservation {
    pub dd_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: ThresholdState,
    pub observation: EnvObservation,
    pub reward: f64,
    pub detected: bool,
    /// The step consumed the last sample of the series.
    pub episode_end: bool,
}

/// Applies `action` to the threshold (clamped to `[0, threshold_max_m]`),
/// scores `sample` against the new threshold and returns the next state and
/// reward.
pub fn env_step(
    state: ThresholdState,
    action: Action,
    sample: DdSample,
    step_m: f64,
    threshold_max_m: f64,
    reward: &RewardScheme,
) -> (ThresholdState, bool, f64) {
    let threshold = match action {
        Action::IncreaseThreshold => state.threshold_m + step_m,
        Action::DecreaseThreshold => state.threshold_m - step_m,
        Action::KeepThreshold => state.threshold_m,
    }
    .clamp(0.0, threshold_max_m);
    let detected = sample.dd_m > threshold;
    let r = if detected == sample.attack {
        reward.correct
    } else {
        reward.incorrect
    };
    (
        ThresholdState {
            threshold_m: threshold,
        },
        detected,
        r,
    )
}

/// Replays a DD series in order, wrapping around at the end. The threshold
/// carries over from one pass to the next.
#[derive(Debug, Clone)]
pub struct ThresholdEnv<'a> {
    series: &'a [DdSample],
    cursor: usize,
    state: ThresholdState,
    step_m: f64,
    threshold_max_m: f64,
    reward: RewardScheme,
}

impl<'a> ThresholdEnv<'a> {
    pub fn new(series: &'a [DdSample], initial: ThresholdState, cfg: &QLearningConfig) -> Self {
        ThresholdEnv {
            series,
            cursor: 0,
            state: initial,
            step_m: cfg.threshold_step_m,
            threshold_max_m: cfg.threshold_max_m,
            reward: cfg.reward,
        }
    }

    pub fn state(&self) -> ThresholdState {
        self.state
    }

    pub fn observation(&self) -> EnvObservation {
        EnvObservation {
            dd_m: self.series[self.cursor].dd_m,
        }
    }

    pub fn step(&mut self, action: Action) -> StepOutcome {
        let sample = self.series[self.cursor];
        let (next, detected, reward) = env_step(
            self.state,
            action,
            sample,
            self.step_m,
            self.threshold_max_m,
            &self.reward,
        );
        self.state = next;
        self.cursor += 1;
        let episode_end = self.cursor == self.series.len();
        if episode_end {
            self.cursor = 0;
        }
        StepOutcome {
            next_state: next,
            observation: self.observation(),
            reward,
            detected,
            episode_end,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(t: f64) -> ThresholdState {
        ThresholdState { threshold_m: t }
    }

    fn sample(dd: f64, attack: bool) -> DdSample {
        DdSample { dd_m: dd, attack }
    }

    #[test]
    fn detected_attack_is_rewarded() {
        let r = RewardScheme::default();
        let (s, det, rew) = env_step(
            st(1.0),
            Action::KeepThreshold,
            sample(60.0, true),
            0.01,
            200.0,
            &r,
        );
        assert_eq!((s.threshold_m, det, rew), (1.0, true, 1.0));
    }

    #[test]
    fn quiet_clean_step_is_rewarded() {
        let r = RewardScheme::default();
        let (_, det, rew) = env_step(
            st(1.0),
            Action::KeepThreshold,
            sample(0.01, false),
            0.01,
            200.0,
            &r,
        );
        assert_eq!((det, rew), (false, 1.0));
    }

    #[test]
    fn missed_attack_is_penalized() {
        let r = RewardScheme::default();
        let (_, det, rew) = env_step(
            st(100.0),
            Action::KeepThreshold,
            sample(60.0, true),
            0.01,
            200.0,
            &r,
        );
        assert_eq!((det, rew), (false, -100.0));
        let (_, det, rew) = env_step(
            st(0.0),
            Action::KeepThreshold,
            sample(0.5, false),
            0.01,
            200.0,
            &r,
        );
        assert_eq!((det, rew), (true, -100.0));
    }

    #[test]
    fn action_applies_before_scoring() {
        let r = RewardScheme::default();
        // dd 1.005 is above 1.0 but not above 1.01
        let (s, det, _) = env_step(
            st(1.0),
            Action::IncreaseThreshold,
            sample(1.005, false),
            0.01,
            200.0,
            &r,
        );
        assert!((s.threshold_m - 1.01).abs() < 1e-12);
        assert!(!det);
    }

    #[test]
    fn threshold_is_clamped() {
        let r = RewardScheme::default();
        let (s, _, _) = env_step(
            st(0.005),
            Action::DecreaseThreshold,
            sample(0.0, false),
            0.01,
            200.0,
            &r,
        );
        assert_eq!(s.threshold_m, 0.0);
        let (s, _, _) = env_step(
            st(199.995),
            Action::IncreaseThreshold,
            sample(0.0, false),
            0.01,
            200.0,
            &r,
        );
        assert_eq!(s.threshold_m, 200.0);
    }

    #[test]
    fn env_wraps_and_reports_episode_end() {
        let series = [sample(0.1, false), sample(70.0, true)];
        let cfg = QLearningConfig::default();
        let mut env = ThresholdEnv::new(&series, st(1.0), &cfg);
        assert_eq!(env.observation().dd_m, 0.1);
        let a = env.step(Action::KeepThreshold);
        assert!(!a.episode_end);
        assert_eq!(a.observation.dd_m, 70.0);
        let b = env.step(Action::KeepThreshold);
        assert!(b.episode_end);
        assert_eq!(b.observation.dd_m, 0.1);
        assert_eq!(a.reward + b.reward, 2.0);
    }
}
