use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Layer, MlpNetwork};
use crate::data::NormalizationStats;
use crate::error::{Error, Result};
use crate::io::{read_json, write_json};

/// On-disk form of a network: `weights[k][i][j]` connects input `i` of layer
/// `k` to its output `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<NormalizationStats>,
}

impl ModelFile {
    pub fn from_network(
        net: &MlpNetwork,
        role: Option<&str>,
        stats: Option<&NormalizationStats>,
    ) -> Self {
        ModelFile {
            role: role.map(str::to_string),
            layer_sizes: net.layer_sizes().to_vec(),
            weights: net
                .layers()
                .iter()
                .map(|l| l.weights.chunks(l.fan_out).map(<[f64]>::to_vec).collect())
                .collect(),
            biases: net.layers().iter().map(|l| l.biases.clone()).collect(),
            normalization: stats.cloned(),
        }
    }

    pub fn to_network(&self) -> Result<MlpNetwork> {
        let sizes = &self.layer_sizes;
        if sizes.len() < 2 {
            return Err(Error::Shape(format!(
                "layer_sizes {sizes:?} has fewer than 2 entries"
            )));
        }
        if self.weights.len() != sizes.len() - 1 || self.biases.len() != sizes.len() - 1 {
            return Err(Error::Shape(format!(
                "{} weight matrices and {} bias vectors for layer_sizes {sizes:?}",
                self.weights.len(),
                self.biases.len()
            )));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        for (k, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let m = &self.weights[k];
            if m.len() != fan_in || m.iter().any(|row| row.len() != fan_out) {
                return Err(Error::Shape(format!(
                    "weight matrix {k} is not {fan_in}x{fan_out}"
                )));
            }
            layers.push(Layer {
                fan_in,
                fan_out,
                weights: m.iter().flatten().copied().collect(),
                biases: self.biases[k].clone(),
            });
        }
        let net = MlpNetwork::from_layers(sizes.clone(), layers)?;
        if let Some(stats) = &self.normalization {
            stats.validate()?;
        }
        Ok(net)
    }
}

/// Writes a network (and optionally its input normalization) as JSON.
pub fn save_model(
    net: &MlpNetwork,
    stats: Option<&NormalizationStats>,
    role: Option<&str>,
    path: &Path,
) -> Result<()> {
    write_json(path, &ModelFile::from_network(net, role, stats))
}

pub fn load_model(path: &Path) -> Result<(MlpNetwork, Option<NormalizationStats>)> {
    let file: ModelFile = read_json(path)?;
    let net = file.to_network().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok((net, file.normalization))
}
