use sha2::{Digest, Sha256};

use super::container::{Dtype, WeightContainer};
use super::ops::{self, Conv2d};
use super::spec::{LayerKind, NetworkSpec, Preprocess};
use super::tensor::{FeatureStack, ImageTensor, Tensor3};
use crate::error::{Error, Result};

/// SqueezeNet fire module: 1x1 squeeze, then parallel 1x1 and 3x3 expands
/// concatenated along channels. Every convolution is followed by ReLU.
#[derive(Clone, Debug, PartialEq)]
pub struct Fire {
    pub squeeze: Conv2d,
    pub expand1x1: Conv2d,
    pub expand3x3: Conv2d,
}

impl Fire {
    pub fn forward(&self, input: &Tensor3) -> Tensor3 {
        let mut s = self.squeeze.forward(input);
        ops::relu_in_place(&mut s);
        let mut e1 = self.expand1x1.forward(&s);
        ops::relu_in_place(&mut e1);
        let mut e3 = self.expand3x3.forward(&s);
        ops::relu_in_place(&mut e3);
        Tensor3::concat_channels(&[e1, e3]).expect("fire expands share spatial size")
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Layer {
    Conv(Conv2d),
    Relu,
    LeakyRelu(f32),
    MaxPool {
        kernel: usize,
        stride: usize,
        ceil_mode: bool,
    },
    Fire(Box<Fire>),
}

/// Inference-ready frozen network. Fields are private and no method takes
/// `&mut self`, so weights cannot change after [`LoadedNetwork::load`].
#[derive(Clone, Debug)]
pub struct LoadedNetwork {
    spec: NetworkSpec,
    preprocess: Preprocess,
    layers: Vec<Layer>,
}

fn resolve_conv(
    container: &WeightContainer,
    layer: usize,
    base: &str,
    in_channels: usize,
    out_channels: usize,
    kernel: (usize, usize),
    stride: usize,
    padding: usize,
) -> Result<Conv2d> {
    let fetch = |name: String, shape: Vec<usize>| -> Result<Vec<f32>> {
        let t = container.get(&name).ok_or_else(|| Error::MissingTensor {
            layer,
            name: name.clone(),
        })?;
        if Dtype::parse(&t.dtype) != Some(Dtype::F32) {
            return Err(Error::UnsupportedDtype {
                layer,
                name,
                dtype: t.dtype.clone(),
            });
        }
        if t.shape != shape {
            return Err(Error::TensorShape {
                layer,
                name,
                expected: shape,
                found: t.shape.clone(),
            });
        }
        Ok(t.to_f32().expect("dtype checked"))
    };
    let weight = fetch(
        format!("{base}.weight"),
        vec![out_channels, in_channels, kernel.0, kernel.1],
    )?;
    let bias = fetch(format!("{base}.bias"), vec![out_channels])?;
    Ok(Conv2d {
        in_channels,
        out_channels,
        kernel_h: kernel.0,
        kernel_w: kernel.1,
        stride,
        padding,
        weight,
        bias,
    })
}

impl LoadedNetwork {
    /// Resolves every parameterized layer of `spec` in `container`.
    ///
    /// Preprocessing statistics come from the container's `__meta__` when
    /// present, else from the spec.
    pub fn load(spec: &NetworkSpec, container: &WeightContainer) -> Result<Self> {
        spec.validate()?;
        let preprocess = match container.preprocess()? {
            Some(p) => p,
            None => spec.preprocess.clone().ok_or_else(|| {
                Error::InvalidSpec(format!(
                    "network `{}`: no preprocessing statistics in container or spec",
                    spec.name
                ))
            })?,
        };
        let mut channels = 3usize;
        let mut layers = Vec::with_capacity(spec.layers.len());
        for (i, layer) in spec.layers.iter().enumerate() {
            let base = format!("{}{}", spec.param_prefix, i);
            let loaded = match layer.kind {
                LayerKind::Conv2d {
                    out_channels,
                    kernel_h,
                    kernel_w,
                    stride,
                    padding,
                } => Layer::Conv(resolve_conv(
                    container,
                    i,
                    &base,
                    channels,
                    out_channels,
                    (kernel_h, kernel_w),
                    stride,
                    padding,
                )?),
                LayerKind::Relu => Layer::Relu,
                LayerKind::LeakyRelu { slope } => Layer::LeakyRelu(slope),
                LayerKind::MaxPool {
                    kernel,
                    stride,
                    ceil_mode,
                } => Layer::MaxPool {
                    kernel,
                    stride,
                    ceil_mode,
                },
                LayerKind::Fire {
                    squeeze,
                    expand1x1,
                    expand3x3,
                } => Layer::Fire(Box::new(Fire {
                    squeeze: resolve_conv(
                        container,
                        i,
                        &format!("{base}.squeeze"),
                        channels,
                        squeeze,
                        (1, 1),
                        1,
                        0,
                    )?,
                    expand1x1: resolve_conv(
                        container,
                        i,
                        &format!("{base}.expand1x1"),
                        squeeze,
                        expand1x1,
                        (1, 1),
                        1,
                        0,
                    )?,
                    expand3x3: resolve_conv(
                        container,
                        i,
                        &format!("{base}.expand3x3"),
                        squeeze,
                        expand3x3,
                        (3, 3),
                        1,
                        1,
                    )?,
                })),
            };
            channels = layer.out_channels(channels);
            layers.push(loaded);
        }
        Ok(Self {
            spec: spec.clone(),
            preprocess,
            layers,
        })
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn preprocess(&self) -> &Preprocess {
        &self.preprocess
    }

    pub fn tap_count(&self) -> usize {
        self.spec.tap_count()
    }

    /// Output shapes of each tap for an input image of this size.
    pub fn tap_shapes(&self, height: usize, width: usize) -> Result<Vec<[usize; 3]>> {
        self.spec.tap_shapes(height, width)
    }

    /// Channel counts of the tap layers (independent of input size).
    pub fn tap_channels(&self) -> Vec<usize> {
        let mut c = 3;
        let mut out = Vec::new();
        for l in &self.spec.layers {
            c = l.out_channels(c);
            if l.tap {
                out.push(c);
            }
        }
        out
    }

    /// Standardizes the image then runs layers up to the last tap.
    pub fn forward_extract(&self, img: &ImageTensor) -> Result<FeatureStack> {
        // Shape check up front so no layer ever sees an empty grid.
        self.spec.tap_shapes(img.height(), img.width())?;
        let mut x = img.grid().clone();
        for c in 0..3 {
            let (m, s) = (self.preprocess.mean[c], self.preprocess.std[c]);
            for v in x.plane_mut(c) {
                *v = (*v - m) / s;
            }
        }
        let last = self.spec.last_tap();
        let mut taps = Vec::with_capacity(self.tap_count());
        for (i, layer) in self.layers[..=last].iter().enumerate() {
            x = match layer {
                Layer::Conv(conv) => conv.forward(&x),
                Layer::Relu => {
                    ops::relu_in_place(&mut x);
                    x
                }
                Layer::LeakyRelu(slope) => {
                    ops::leaky_relu_in_place(&mut x, *slope);
                    x
                }
                Layer::MaxPool {
                    kernel,
                    stride,
                    ceil_mode,
                } => ops::max_pool(&x, *kernel, *stride, *ceil_mode),
                Layer::Fire(fire) => fire.forward(&x),
            };
            if self.spec.layers[i].tap {
                taps.push(x.clone());
            }
        }
        let stack = FeatureStack::new(taps);
        if !stack.is_finite() {
            return Err(Error::InvalidImage("network produced non-finite activations".into()));
        }
        Ok(stack)
    }

    /// SHA-256 over every parameter in layer order, as lowercase hex.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        let mut feed = |conv: &Conv2d| {
            for v in conv.weight.iter().chain(&conv.bias) {
                h.update(v.to_le_bytes());
            }
        };
        for layer in &self.layers {
            match layer {
                Layer::Conv(c) => feed(c),
                Layer::Fire(f) => {
                    feed(&f.squeeze);
                    feed(&f.expand1x1);
                    feed(&f.expand3x3);
                }
                _ => {}
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Conv(c) => c.weight.len() + c.bias.len(),
                Layer::Fire(f) => [&f.squeeze, &f.expand1x1, &f.expand3x3]
                    .iter()
                    .map(|c| c.weight.len() + c.bias.len())
                    .sum(),
                _ => 0,
            })
            .sum()
    }
}
