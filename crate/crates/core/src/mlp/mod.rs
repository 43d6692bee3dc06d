//! Dense feed-forward networks with ReLU hidden layers and an identity
//! output, trained under mean absolute error with Adam.

mod adam;
mod file;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use file::{load_model, save_model, ModelFile};
pub use train::{train, Dataset, TrainConfig};

use serde::{Deserialize, Serialize};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Regression loss averaged over output dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Mean absolute error; subgradient 0 at a zero residual.
    #[default]
    Mae,
    /// Mean squared error.
    Mse,
}

/// One affine layer. `weights[i * fan_out + j]` connects input `i` to
/// output `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub fan_in: usize,
    pub fan_out: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Layer {
            fan_in,
            fan_out,
            weights: vec![0.0; fan_in * fan_out],
            biases: vec![0.0; fan_out],
        }
    }

    fn affine(&self, input: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&self.biases);
        for (i, &a) in input.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let row = &self.weights[i * self.fan_out..(i + 1) * self.fan_out];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += a * w;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    layers: Vec<Layer>,
}

fn check_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
        return Err(Error::invalid(format!(
            "layer sizes {layer_sizes:?}: need at least 2 layers, all non-zero"
        )));
    }
    Ok(())
}

impl MlpNetwork {
    /// Glorot-uniform weights and zero biases, deterministic under `rng_seed`.
    pub fn new(layer_sizes: &[usize], rng_seed: u64) -> Result<Self> {
        let mut net = Self::zeros(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        for layer in &mut net.layers {
            let limit = (6.0 / (layer.fan_in + layer.fan_out) as f64).sqrt();
            for w in &mut layer.weights {
                *w = rng.gen_range(-limit..=limit);
            }
        }
        Ok(net)
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        check_sizes(layer_sizes)?;
        let layers = layer_sizes
            .windows(2)
            .map(|w| Layer::zeros(w[0], w[1]))
            .collect();
        Ok(MlpNetwork {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    pub(crate) fn from_layers(layer_sizes: Vec<usize>, layers: Vec<Layer>) -> Result<Self> {
        check_sizes(&layer_sizes)?;
        if layers.len() != layer_sizes.len() - 1 {
            return Err(Error::Shape(format!(
                "{} layers for sizes {layer_sizes:?}",
                layers.len()
            )));
        }
        for (k, (layer, w)) in layers.iter().zip(layer_sizes.windows(2)).enumerate() {
            if layer.fan_in != w[0]
                || layer.fan_out != w[1]
                || layer.weights.len() != w[0] * w[1]
                || layer.biases.len() != w[1]
            {
                return Err(Error::Shape(format!(
                    "layer {k} does not match sizes {layer_sizes:?}"
                )));
            }
            if layer
                .weights
                .iter()
                .chain(&layer.biases)
                .any(|x| !x.is_finite())
            {
                return Err(Error::invalid(format!(
                    "layer {k} has non-finite parameters"
                )));
            }
        }
        Ok(MlpNetwork {
            layer_sizes,
            layers,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("at least two layers")
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Flattened parameters, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.parameter_count());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count() {
            return Err(Error::Shape(format!(
                "{} parameters for a network with {}",
                params.len(),
                self.parameter_count()
            )));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, r) = rest.split_at(l.weights.len());
            l.weights.copy_from_slice(w);
            let (b, r) = r.split_at(l.biases.len());
            l.biases.copy_from_slice(b);
            rest = r;
        }
        Ok(())
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut ws = Workspace::new(self);
        self.forward_into(input, &mut ws);
        Ok(ws.output().to_vec())
    }

    /// Analytic gradient of the mean absolute error over output dimensions.
    /// The subgradient at |0| and the ReLU derivative at 0 are both taken as 0.
    pub fn gradients_mae(&self, input: &[f64], target: &[f64]) -> Result<Gradients> {
        self.check_input(input)?;
        self.check_target(target)?;
        let mut grads = Gradients::zeros_like(self);
        let mut ws = Workspace::new(self);
        self.accumulate(input, target, Loss::Mae, 1.0, &mut grads, &mut ws);
        Ok(grads)
    }

    /// Gradient of the given loss for one sample.
    pub fn gradients(&self, input: &[f64], target: &[f64], loss: Loss) -> Result<Gradients> {
        self.check_input(input)?;
        self.check_target(target)?;
        let mut grads = Gradients::zeros_like(self);
        let mut ws = Workspace::new(self);
        self.accumulate(input, target, loss, 1.0, &mut grads, &mut ws);
        Ok(grads)
    }

    pub(crate) fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} values, network expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        if input.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite network input"));
        }
        Ok(())
    }

    pub(crate) fn check_target(&self, target: &[f64]) -> Result<()> {
        if target.len() != self.output_dim() {
            return Err(Error::Shape(format!(
                "target has {} values, network outputs {}",
                target.len(),
                self.output_dim()
            )));
        }
        if target.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite training target"));
        }
        Ok(())
    }

    pub(crate) fn forward_into(&self, input: &[f64], ws: &mut Workspace) {
        ws.activations[0].copy_from_slice(input);
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let (done, rest) = ws.activations.split_at_mut(k + 1);
            let out = &mut rest[0];
            layer.affine(&done[k], out);
            if k < last {
                for x in out.iter_mut() {
                    if *x < 0.0 {
                        *x = 0.0;
                    }
                }
            }
        }
    }

    /// Adds `scale * dL/dθ` for one sample into `grads` and returns the
    /// sample's loss.
    pub(crate) fn accumulate(
        &self,
        input: &[f64],
        target: &[f64],
        loss_kind: Loss,
        scale: f64,
        grads: &mut Gradients,
        ws: &mut Workspace,
    ) -> f64 {
        self.forward_into(input, ws);
        let k_out = self.output_dim() as f64;
        let n = self.layers.len();

        let mut loss = 0.0;
        {
            let out = &ws.activations[n];
            let delta = &mut ws.deltas[n - 1];
            for ((d, &y), &t) in delta.iter_mut().zip(out).zip(target) {
                let r = y - t;
                *d = match loss_kind {
                    Loss::Mae => {
                        loss += r.abs();
                        if r > 0.0 {
                            scale / k_out
                        } else if r < 0.0 {
                            -scale / k_out
                        } else {
                            0.0
                        }
                    }
                    Loss::Mse => {
                        loss += r * r;
                        2.0 * r * scale / k_out
                    }
                };
            }
        }

        for k in (0..n).rev() {
            let layer = &self.layers[k];
            let g = &mut grads.layers[k];
            let a_prev = &ws.activations[k];
            let (lower, upper) = ws.deltas.split_at_mut(k);
            let delta = &upper[0];
            for (gb, &d) in g.biases.iter_mut().zip(delta) {
                *gb += d;
            }
            for (i, &a) in a_prev.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let row = &mut g.weights[i * layer.fan_out..(i + 1) * layer.fan_out];
                for (gw, &d) in row.iter_mut().zip(delta) {
                    *gw += a * d;
                }
            }
            if k > 0 {
                // back through the ReLU of the previous layer's output
                let prev_delta = &mut lower[k - 1];
                for (i, pd) in prev_delta.iter_mut().enumerate() {
                    if a_prev[i] > 0.0 {
                        let row = &layer.weights[i * layer.fan_out..(i + 1) * layer.fan_out];
                        *pd = row.iter().zip(delta).map(|(w, d)| w * d).sum();
                    } else {
                        *pd = 0.0;
                    }
                }
            }
        }
        loss / k_out
    }
}

/// Scratch buffers reused across forward/backward passes.
pub(crate) struct Workspace {
    activations: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
}

impl Workspace {
    pub(crate) fn new(net: &MlpNetwork) -> Self {
        Workspace {
            activations: net.layer_sizes.iter().map(|&s| vec![0.0; s]).collect(),
            deltas: net.layer_sizes[1..].iter().map(|&s| vec![0.0; s]).collect(),
        }
    }

    pub(crate) fn output(&self) -> &[f64] {
        self.activations.last().expect("non-empty")
    }
}

/// Per-parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|x| *x = 0.0);
            l.biases.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    /// Flattened in the same order as [`MlpNetwork::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    fn matches(&self, net: &MlpNetwork) -> bool {
        self.layers.len() == net.layers.len()
            && self.layers.iter().zip(&net.layers).all(|(g, l)| {
                g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len()
            })
    }
}
