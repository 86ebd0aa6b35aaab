use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-channel standardization applied as `(value - mean) / std`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocess {
    pub mean: [f32; 3],
    pub std: [f32; 3],
}

impl Preprocess {
    pub fn identity() -> Self {
        Self {
            mean: [0.0; 3],
            std: [1.0; 3],
        }
    }

    /// The ImageNet convention statistics.
    pub fn imagenet() -> Self {
        Self {
            mean: [0.485, 0.456, 0.406],
            std: [0.229, 0.224, 0.225],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidSpec(format!("bad preprocessing statistics {self:?}")));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerKind {
    Conv2d {
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        padding: usize,
    },
    Relu,
    LeakyRelu {
        slope: f32,
    },
    MaxPool {
        kernel: usize,
        stride: usize,
        /// Output size rounds up instead of down (SqueezeNet pools).
        #[serde(default)]
        ceil_mode: bool,
    },
    Fire {
        squeeze: usize,
        expand1x1: usize,
        expand3x3: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    #[serde(flatten)]
    pub kind: LayerKind,
    #[serde(default)]
    pub tap: bool,
}

impl LayerSpec {
    pub fn conv(out_channels: usize, kernel: usize, stride: usize, padding: usize) -> Self {
        Self {
            kind: LayerKind::Conv2d {
                out_channels,
                kernel_h: kernel,
                kernel_w: kernel,
                stride,
                padding,
            },
            tap: false,
        }
    }

    pub fn relu() -> Self {
        Self {
            kind: LayerKind::Relu,
            tap: false,
        }
    }

    pub fn leaky_relu(slope: f32) -> Self {
        Self {
            kind: LayerKind::LeakyRelu { slope },
            tap: false,
        }
    }

    pub fn max_pool(kernel: usize, stride: usize) -> Self {
        Self {
            kind: LayerKind::MaxPool {
                kernel,
                stride,
                ceil_mode: false,
            },
            tap: false,
        }
    }

    pub fn max_pool_ceil(kernel: usize, stride: usize) -> Self {
        Self {
            kind: LayerKind::MaxPool {
                kernel,
                stride,
                ceil_mode: true,
            },
            tap: false,
        }
    }

    pub fn fire(squeeze: usize, expand1x1: usize, expand3x3: usize) -> Self {
        Self {
            kind: LayerKind::Fire {
                squeeze,
                expand1x1,
                expand3x3,
            },
            tap: false,
        }
    }

    pub fn tapped(mut self) -> Self {
        self.tap = true;
        self
    }

    /// Channel count after this layer given `in_channels`.
    pub fn out_channels(&self, in_channels: usize) -> usize {
        match self.kind {
            LayerKind::Conv2d { out_channels, .. } => out_channels,
            LayerKind::Fire {
                expand1x1, expand3x3, ..
            } => expand1x1 + expand3x3,
            _ => in_channels,
        }
    }

    /// Spatial size after this layer, or `None` if the grid would be empty.
    pub fn out_size(&self, height: usize, width: usize) -> Option<(usize, usize)> {
        match self.kind {
            LayerKind::Conv2d {
                kernel_h,
                kernel_w,
                stride,
                padding,
                ..
            } => Some((
                conv_out_dim(height, kernel_h, stride, padding)?,
                conv_out_dim(width, kernel_w, stride, padding)?,
            )),
            LayerKind::MaxPool {
                kernel,
                stride,
                ceil_mode,
            } => Some((
                pool_out_dim(height, kernel, stride, ceil_mode)?,
                pool_out_dim(width, kernel, stride, ceil_mode)?,
            )),
            LayerKind::Fire { .. } | LayerKind::Relu | LayerKind::LeakyRelu { .. } => {
                if height == 0 || width == 0 {
                    None
                } else {
                    Some((height, width))
                }
            }
        }
    }
}

/// `floor((in + 2 pad - kernel) / stride) + 1`, `None` when not positive.
pub fn conv_out_dim(input: usize, kernel: usize, stride: usize, padding: usize) -> Option<usize> {
    let padded = input + 2 * padding;
    if input == 0 || padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

/// Pooling without padding. In ceil mode the last window must still start
/// inside the input.
pub fn pool_out_dim(input: usize, kernel: usize, stride: usize, ceil_mode: bool) -> Option<usize> {
    if input < kernel || stride == 0 || kernel == 0 {
        return None;
    }
    let span = input - kernel;
    let mut out = if ceil_mode {
        span.div_ceil(stride) + 1
    } else {
        span / stride + 1
    };
    if ceil_mode && (out - 1) * stride >= input {
        out -= 1;
    }
    Some(out)
}

fn default_prefix() -> String {
    "features.".to_string()
}

/// Architecture description: ordered layers with tap flags.
///
/// Parameter tensors are resolved by layer index: a convolution at index `i`
/// reads `{param_prefix}{i}.weight` and `{param_prefix}{i}.bias`; a fire
/// module reads the `squeeze`, `expand1x1` and `expand3x3` sub-convolutions
/// under `{param_prefix}{i}.`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    /// Fallback statistics when the weight container carries none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preprocess: Option<Preprocess>,
    #[serde(default = "default_prefix")]
    pub param_prefix: String,
}

impl NetworkSpec {
    pub fn new(name: impl Into<String>, layers: Vec<LayerSpec>) -> Self {
        Self {
            name: name.into(),
            layers,
            preprocess: None,
            param_prefix: default_prefix(),
        }
    }

    pub fn with_preprocess(mut self, preprocess: Preprocess) -> Self {
        self.preprocess = Some(preprocess);
        self
    }

    pub fn tap_count(&self) -> usize {
        self.layers.iter().filter(|l| l.tap).count()
    }

    pub fn tap_indices(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.tap.then_some(i))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.tap_count() == 0 {
            return Err(Error::InvalidSpec(format!("network `{}` has no tap layer", self.name)));
        }
        for (i, layer) in self.layers.iter().enumerate() {
            let ok = match layer.kind {
                LayerKind::Conv2d {
                    out_channels,
                    kernel_h,
                    kernel_w,
                    stride,
                    ..
                } => out_channels > 0 && kernel_h > 0 && kernel_w > 0 && stride > 0,
                LayerKind::MaxPool { kernel, stride, .. } => kernel > 0 && stride > 0,
                LayerKind::Fire {
                    squeeze,
                    expand1x1,
                    expand3x3,
                } => squeeze > 0 && expand1x1 > 0 && expand3x3 > 0,
                LayerKind::LeakyRelu { slope } => slope.is_finite(),
                LayerKind::Relu => true,
            };
            if !ok {
                return Err(Error::InvalidSpec(format!(
                    "layer {i} has invalid parameters: {:?}",
                    layer.kind
                )));
            }
        }
        if let Some(p) = &self.preprocess {
            p.validate()?;
        }
        Ok(())
    }

    /// Shapes `(C, H, W)` of every tap for an input of the given size.
    pub fn tap_shapes(&self, height: usize, width: usize) -> Result<Vec<[usize; 3]>> {
        let (mut c, mut h, mut w) = (3usize, height, width);
        let mut taps = Vec::new();
        for (i, layer) in self.layers[..self.last_tap() + 1].iter().enumerate() {
            let (nh, nw) = layer.out_size(h, w).ok_or(Error::ImageTooSmall {
                layer: i,
                height,
                width,
            })?;
            c = layer.out_channels(c);
            h = nh;
            w = nw;
            if layer.tap {
                taps.push([c, h, w]);
            }
        }
        Ok(taps)
    }

    /// Index of the last tapped layer; layers after it never run.
    pub fn last_tap(&self) -> usize {
        self.layers.iter().rposition(|l| l.tap).unwrap_or(0)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn conv_shape_law() {
        assert_eq!(conv_out_dim(32, 11, 4, 2), Some(7));
        assert_eq!(conv_out_dim(7, 3, 1, 1), Some(7));
        assert_eq!(conv_out_dim(2, 5, 1, 1), None);
        assert_eq!(conv_out_dim(1, 3, 1, 1), Some(1));
    }

    #[test]
    fn pool_shape_law() {
        assert_eq!(pool_out_dim(7, 3, 2, false), Some(3));
        assert_eq!(pool_out_dim(3, 3, 2, false), Some(1));
        assert_eq!(pool_out_dim(2, 3, 2, false), None);
        // ceil mode: 15 -> ceil(12/2)+1 = 7; 16 -> ceil(13/2)+1 = 8
        assert_eq!(pool_out_dim(15, 3, 2, true), Some(7));
        assert_eq!(pool_out_dim(16, 3, 2, true), Some(8));
        assert_eq!(pool_out_dim(4, 3, 2, true), Some(2));
    }

    #[test]
    fn json_round_trip_and_taps() {
        let spec = NetworkSpec::new(
            "toy",
            vec![
                LayerSpec::conv(4, 3, 1, 1),
                LayerSpec::relu().tapped(),
                LayerSpec::max_pool_ceil(3, 2),
                LayerSpec::fire(2, 3, 3).tapped(),
            ],
        );
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"type\":\"conv2d\""));
        let back = NetworkSpec::from_json(&text).unwrap();
        assert_eq!(back, spec);
        assert_eq!(back.tap_indices(), vec![1, 3]);
        assert_eq!(back.tap_shapes(8, 8).unwrap(), vec![[4, 8, 8], [6, 4, 4]]);
    }

    #[test]
    fn spec_without_taps_is_invalid() {
        let spec = NetworkSpec::new("none", vec![LayerSpec::conv(4, 3, 1, 1), LayerSpec::relu()]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn parses_hand_written_layer_list() {
        let text = r#"{"name":"t","layers":[
            {"type":"conv2d","out_channels":2,"kernel_h":1,"kernel_w":1,"stride":1,"padding":0},
            {"type":"leaky_relu","slope":0.2,"tap":true}]}"#;
        let spec = NetworkSpec::from_json(text).unwrap();
        assert_eq!(spec.param_prefix, "features.");
        assert_eq!(spec.tap_count(), 1);
    }
}
