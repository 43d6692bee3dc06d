use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{adam_step, AdamConfig, AdamState, Gradients, Loss, MlpNetwork, Workspace};
use crate::error::{Error, Result};

/// Row-major input/target pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    input_dim: usize,
    output_dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Dataset {
            input_dim,
            output_dim,
            inputs: Vec::new(),
            targets: Vec::new(),
        }
    }

    pub fn push(&mut self, input: &[f64], target: &[f64]) -> Result<()> {
        if input.len() != self.input_dim || target.len() != self.output_dim {
            return Err(Error::Shape(format!(
                "row of {}->{} values for a {}->{} dataset",
                input.len(),
                target.len(),
                self.input_dim,
                self.output_dim
            )));
        }
        self.inputs.extend_from_slice(input);
        self.targets.extend_from_slice(target);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.len().checked_div(self.input_dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.output_dim..(i + 1) * self.output_dim]
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub rng_seed: u64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1000,
            batch_size: 32,
            rng_seed: 0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid("epochs and batch size must be positive"));
        }
        self.adam.validate()
    }
}

/// Minibatch Adam under mean absolute error. Rows are reshuffled every epoch
/// from a generator seeded with `cfg.rng_seed`. Returns the mean per-sample
/// loss seen during each epoch.
pub fn train(net: &mut MlpNetwork, data: &Dataset, cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if data.input_dim() != net.input_dim() || data.output_dim() != net.output_dim() {
        return Err(Error::Shape(format!(
            "dataset {}->{} does not fit network {:?}",
            data.input_dim(),
            data.output_dim(),
            net.layer_sizes()
        )));
    }
    for i in 0..data.len() {
        net.check_input(data.input(i))?;
        net.check_target(data.target(i))?;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut adam = AdamState::new(net, cfg.adam);
    let mut grads = Gradients::zeros_like(net);
    let mut ws = Workspace::new(net);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            grads.fill_zero();
            let scale = 1.0 / batch.len() as f64;
            for &i in batch {
                epoch_loss += net.accumulate(
                    data.input(i),
                    data.target(i),
                    Loss::Mae,
                    scale,
                    &mut grads,
                    &mut ws,
                );
            }
            adam_step(net, &grads, &mut adam)?;
        }
        history.push(epoch_loss / data.len() as f64);
    }
    Ok(history)
}
