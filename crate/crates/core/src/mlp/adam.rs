use serde::{Deserialize, Serialize};

use super::{Gradients, MlpNetwork};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate.is_finite()
            && self.learning_rate >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid Adam settings {self:?}")))
        }
    }
}

/// Moment accumulators for one network.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    first: Gradients,
    second: Gradients,
    /// Number of updates applied so far.
    pub t: u64,
}

impl AdamState {
    pub fn new(net: &MlpNetwork, config: AdamConfig) -> Self {
        AdamState {
            config,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `net` along `grads`.
pub fn adam_step(net: &mut MlpNetwork, grads: &Gradients, state: &mut AdamState) -> Result<()> {
    if !grads.matches(net) || !state.first.matches(net) {
        return Err(Error::Shape(
            "Adam state or gradients do not match the network".into(),
        ));
    }
    state.t += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.t as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);

    let update = |theta: &mut [f64], g: &[f64], m: &mut [f64], v: &mut [f64]| {
        for (((p, &g), m), v) in theta.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
        }
    };

    for (k, layer) in net.layers_mut().iter_mut().enumerate() {
        let g = &grads.layers[k];
        let m = &mut state.first.layers[k];
        let v = &mut state.second.layers[k];
        update(
            &mut layer.weights,
            &g.weights,
            &mut m.weights,
            &mut v.weights,
        );
        update(&mut layer.biases, &g.biases, &mut m.biases, &mut v.biases);
    }
    Ok(())
}
