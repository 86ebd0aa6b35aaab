use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ComparisonMethod;
use crate::error::{Error, Result};

/// Nonnegative per-channel scalars for every tap layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarWeights {
    layers: Vec<Vec<f64>>,
}

impl ScalarWeights {
    /// The baseline metric: every scalar is 1.
    pub fn ones(channels: &[usize]) -> Self {
        Self::filled(channels, 1.0)
    }

    pub fn filled(channels: &[usize], value: f64) -> Self {
        assert!(value >= 0.0, "scalars must be nonnegative");
        Self {
            layers: channels.iter().map(|&c| vec![value; c]).collect(),
        }
    }

    pub fn from_layers(layers: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(v) = layers.iter().flatten().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Config(format!("scalar {v} is not a finite nonnegative value")));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Vec<f64>] {
        &self.layers
    }

    pub fn channel_counts(&self) -> Vec<usize> {
        self.layers.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn min(&self) -> f64 {
        self.layers.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn scaled(&self, k: f64) -> Self {
        assert!(k >= 0.0);
        Self {
            layers: self.layers.iter().map(|l| l.iter().map(|v| v * k).collect()).collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flatten().copied()
    }

    /// Overwrites all entries from a flat slice, clamping each to `>= 0`.
    pub(crate) fn assign_clamped(&mut self, flat: &[f64]) {
        debug_assert_eq!(flat.len(), self.len());
        for (dst, src) in self.layers.iter_mut().flatten().zip(flat) {
            *dst = src.max(0.0);
        }
    }

    pub fn to_file(&self, method: ComparisonMethod, network: &str) -> WeightsFile {
        WeightsFile {
            layers: self
                .layers
                .iter()
                .enumerate()
                .map(|(index, w)| LayerWeights {
                    index,
                    weights: w.clone(),
                })
                .collect(),
            method,
            network: network.to_string(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>, method: ComparisonMethod, network: &str) -> Result<()> {
        self.to_file(method, network).write(path)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub index: usize,
    pub weights: Vec<f64>,
}

/// On-disk form of [`ScalarWeights`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub layers: Vec<LayerWeights>,
    pub method: ComparisonMethod,
    pub network: String,
}

impl WeightsFile {
    pub fn weights(&self) -> Result<ScalarWeights> {
        let mut layers = self.layers.clone();
        layers.sort_by_key(|l| l.index);
        if layers.iter().enumerate().any(|(i, l)| l.index != i) {
            return Err(Error::Config("scalar layer indices are not 0..n".into()));
        }
        ScalarWeights::from_layers(layers.into_iter().map(|l| l.weights).collect())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }
}
