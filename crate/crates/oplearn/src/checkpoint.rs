//! Versioned JSON checkpoints with weights as base64 little-endian `f64`.

use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use oplearn_core::deeponet::{DeepONetParams, DeepONetShape};
use oplearn_core::frechet::{FrechetNetParams, FrechetShape, ScalarSigmoid};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const CHECKPOINT_FORMAT: &str = "oplearn-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Architecture {
    Frechet {
        x: f64,
        x_index: usize,
        shape: FrechetShape,
        sigmoid: ScalarSigmoid,
        train_activation: bool,
    },
    Deeponet {
        shape: DeepONetShape,
        sensor_lo: f64,
        sensor_hi: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub architecture: Architecture,
    pub config_hash: String,
    pub data_hash: String,
    pub param_count: usize,
    pub n_weights: usize,
    pub weights: String,
    pub loss_trace: Vec<f64>,
}

pub fn encode_weights(w: &[f64]) -> String {
    let bytes: Vec<u8> = w.iter().flat_map(|v| v.to_le_bytes()).collect();
    STANDARD.encode(bytes)
}

pub fn decode_weights(s: &str) -> std::result::Result<Vec<f64>, String> {
    let bytes = STANDARD.decode(s).map_err(|e| e.to_string())?;
    if bytes.len() % 8 != 0 {
        return Err(format!("weight payload of {} bytes is not a whole number of f64", bytes.len()));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

impl Checkpoint {
    fn new(architecture: Architecture, weights: &[f64], param_count: usize, hashes: (&str, &str), trace: &[f64]) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            architecture,
            config_hash: hashes.0.into(),
            data_hash: hashes.1.into(),
            param_count,
            n_weights: weights.len(),
            weights: encode_weights(weights),
            loss_trace: trace.to_vec(),
        }
    }

    pub fn frechet(p: &FrechetNetParams, x: f64, x_index: usize, hashes: (&str, &str), trace: &[f64]) -> Self {
        let arch = Architecture::Frechet {
            x,
            x_index,
            shape: p.shape,
            sigmoid: p.sigmoid,
            train_activation: p.train_activation,
        };
        Self::new(arch, &p.weights, p.param_count(), hashes, trace)
    }

    pub fn deeponet(p: &DeepONetParams, sensor_lo: f64, sensor_hi: f64, hashes: (&str, &str), trace: &[f64]) -> Self {
        let arch = Architecture::Deeponet {
            shape: p.shape,
            sensor_lo,
            sensor_hi,
        };
        Self::new(arch, &p.weights, p.param_count(), hashes, trace)
    }

    fn weights_checked(&self, path: &Path, expected: usize) -> Result<Vec<f64>> {
        let err = |msg: String| HarnessError::Format {
            path: path.to_path_buf(),
            offset: 0,
            msg,
        };
        let w = decode_weights(&self.weights).map_err(err)?;
        if w.len() != self.n_weights || w.len() != expected {
            return Err(err(format!(
                "truncated or mismatched weights: header says {}, payload has {}, shape needs {expected}",
                self.n_weights,
                w.len()
            )));
        }
        if let Some(i) = w.iter().position(|v| !v.is_finite()) {
            return Err(err(format!("weight {i} is not finite")));
        }
        Ok(w)
    }

    pub fn to_frechet(&self, path: &Path, expected: &FrechetShape) -> Result<FrechetNetParams> {
        let Architecture::Frechet {
            shape,
            sigmoid,
            train_activation,
            ..
        } = &self.architecture
        else {
            return Err(HarnessError::Validation(format!("{} is not a Fréchet checkpoint", path.display())));
        };
        if shape != expected {
            return Err(HarnessError::Validation(format!(
                "{}: checkpoint shape {shape:?} does not match configured {expected:?}",
                path.display()
            )));
        }
        Ok(FrechetNetParams {
            shape: *shape,
            sigmoid: *sigmoid,
            train_activation: *train_activation,
            weights: self.weights_checked(path, shape.weights_len())?,
        })
    }

    pub fn to_deeponet(&self, path: &Path, expected: &DeepONetShape) -> Result<DeepONetParams> {
        let Architecture::Deeponet { shape, .. } = &self.architecture else {
            return Err(HarnessError::Validation(format!("{} is not a DeepONet checkpoint", path.display())));
        };
        if shape != expected {
            return Err(HarnessError::Validation(format!(
                "{}: checkpoint shape {shape:?} does not match configured {expected:?}",
                path.display()
            )));
        }
        Ok(DeepONetParams {
            shape: *shape,
            weights: self.weights_checked(path, shape.param_count())?,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("checkpoint serializes") + "\n";
        std::fs::write(path, text).map_err(HarnessError::io(path))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(HarnessError::io(path))?;
        let cp: Self = serde_json::from_str(&text).map_err(|e| HarnessError::Format {
            path: path.to_path_buf(),
            offset: 0,
            msg: e.to_string(),
        })?;
        if cp.format != CHECKPOINT_FORMAT || cp.version != CHECKPOINT_VERSION {
            return Err(HarnessError::Format {
                path: path.to_path_buf(),
                offset: 0,
                msg: format!("unsupported checkpoint {} v{}", cp.format, cp.version),
            });
        }
        Ok(cp)
    }
}
