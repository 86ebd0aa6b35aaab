use rand::Rng;

use super::loss::sigmoid;
use crate::error::{Error, Result};
use crate::tensor_net::{RawTensor, WeightContainer};

pub const HIDDEN: usize = 32;
pub const INPUTS: usize = 5;
pub const LEAKY_SLOPE: f64 = 0.2;
/// Added to denominators of the ratio inputs.
pub const RATIO_EPSILON: f64 = 1e-10;

/// `(d0, d1, d0 - d1, d0 / (d1 + eps), d1 / (d0 + eps))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JudgeInput(pub [f64; INPUTS]);

impl JudgeInput {
    pub fn new(d0: f64, d1: f64) -> Self {
        Self([d0, d1, d0 - d1, d0 / (d1 + RATIO_EPSILON), d1 / (d0 + RATIO_EPSILON)])
    }

    /// Partial derivatives of each entry with respect to `d0` and `d1`.
    pub fn jacobian(d0: f64, d1: f64) -> ([f64; INPUTS], [f64; INPUTS]) {
        let (e0, e1) = (d0 + RATIO_EPSILON, d1 + RATIO_EPSILON);
        (
            [1.0, 0.0, 1.0, 1.0 / e1, -d1 / (e0 * e0)],
            [0.0, 1.0, -1.0, -d0 / (e1 * e1), 1.0 / e0],
        )
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

const LAYERS: [(usize, usize); 3] = [(HIDDEN, INPUTS), (HIDDEN, HIDDEN), (1, HIDDEN)];

fn layer_offsets() -> [(usize, usize); 3] {
    let mut off = 0;
    LAYERS.map(|(o, i)| {
        let w = off;
        off += o * i + o;
        (w, w + o * i)
    })
}

pub const PARAM_COUNT: usize = HIDDEN * INPUTS + HIDDEN + HIDDEN * HIDDEN + HIDDEN + HIDDEN + 1;

fn leaky(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

fn leaky_grad(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

/// Three affine layers on the 5-vector: 5 to 32 and 32 to 32 with leaky
/// ReLU, then 32 to 1 with a sigmoid. Parameters are stored flat, each
/// layer as a row-major `[out, in]` weight followed by its bias.
#[derive(Clone, Debug, PartialEq)]
pub struct JudgeNet {
    params: Vec<f64>,
}

/// Intermediate values kept for the backward pass.
#[derive(Clone, Debug)]
pub struct JudgeTrace {
    input: [f64; INPUTS],
    pre1: [f64; HIDDEN],
    h1: [f64; HIDDEN],
    pre2: [f64; HIDDEN],
    h2: [f64; HIDDEN],
    pub logit: f64,
}

fn affine(params: &[f64], (w_off, b_off): (usize, usize), (out, inp): (usize, usize), x: &[f64], y: &mut [f64]) {
    for o in 0..out {
        let row = &params[w_off + o * inp..w_off + (o + 1) * inp];
        y[o] = params[b_off + o] + row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>();
    }
}

impl JudgeNet {
    pub fn zeros() -> Self {
        Self {
            params: vec![0.0; PARAM_COUNT],
        }
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut net = Self::zeros();
        for ((out, inp), (w_off, _)) in LAYERS.into_iter().zip(layer_offsets()) {
            let bound = 1.0 / (inp as f64).sqrt();
            for p in &mut net.params[w_off..w_off + out * inp] {
                *p = rng.gen_range(-bound..=bound);
            }
        }
        net
    }

    pub fn from_params(params: Vec<f64>) -> Result<Self> {
        if params.len() != PARAM_COUNT {
            return Err(Error::InvalidSpec(format!(
                "judge expects {PARAM_COUNT} parameters, got {}",
                params.len()
            )));
        }
        Ok(Self { params })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn trace(&self, input: &JudgeInput) -> JudgeTrace {
        let offs = layer_offsets();
        let mut t = JudgeTrace {
            input: input.0,
            pre1: [0.0; HIDDEN],
            h1: [0.0; HIDDEN],
            pre2: [0.0; HIDDEN],
            h2: [0.0; HIDDEN],
            logit: 0.0,
        };
        affine(&self.params, offs[0], LAYERS[0], &input.0, &mut t.pre1);
        t.h1 = t.pre1.map(leaky);
        affine(&self.params, offs[1], LAYERS[1], &t.h1, &mut t.pre2);
        t.h2 = t.pre2.map(leaky);
        let mut z = [0.0];
        affine(&self.params, offs[2], LAYERS[2], &t.h2, &mut z);
        t.logit = z[0];
        t
    }

    /// Probability that `x1` is the more similar image.
    pub fn forward(&self, input: &JudgeInput) -> f64 {
        sigmoid(self.trace(input).logit)
    }

    /// Adds `dlogit * d logit / d params` into `grad` and returns
    /// `d logit / d input` scaled by `dlogit`.
    pub fn backward(&self, trace: &JudgeTrace, dlogit: f64, grad: &mut [f64]) -> [f64; INPUTS] {
        let offs = layer_offsets();
        let p = &self.params;

        let (w3, b3) = offs[2];
        let mut d2 = [0.0; HIDDEN];
        for j in 0..HIDDEN {
            grad[w3 + j] += dlogit * trace.h2[j];
            d2[j] = dlogit * p[w3 + j] * leaky_grad(trace.pre2[j]);
        }
        grad[b3] += dlogit;

        let (w2, b2) = offs[1];
        let mut d1 = [0.0; HIDDEN];
        for o in 0..HIDDEN {
            grad[b2 + o] += d2[o];
            for i in 0..HIDDEN {
                grad[w2 + o * HIDDEN + i] += d2[o] * trace.h1[i];
                d1[i] += d2[o] * p[w2 + o * HIDDEN + i];
            }
        }
        for i in 0..HIDDEN {
            d1[i] *= leaky_grad(trace.pre1[i]);
        }

        let (w1, b1) = offs[0];
        let mut dx = [0.0; INPUTS];
        for o in 0..HIDDEN {
            grad[b1 + o] += d1[o];
            for i in 0..INPUTS {
                grad[w1 + o * INPUTS + i] += d1[o] * trace.input[i];
                dx[i] += d1[o] * p[w1 + o * INPUTS + i];
            }
        }
        dx
    }

    /// Weight `[out, in]` and bias `[out]` of layer `l` (0, 1 or 2).
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (out, inp) = LAYERS[l];
        let (w, b) = layer_offsets()[l];
        (&self.params[w..w + out * inp], &self.params[b..b + out])
    }

    /// Stores the layers as `judge.{l}.weight` / `judge.{l}.bias` f64 tensors.
    pub fn to_container(&self, container: &mut WeightContainer) {
        for (l, (out, inp)) in LAYERS.into_iter().enumerate() {
            let (w, b) = self.layer(l);
            container.insert(format!("judge.{l}.weight"), RawTensor::from_f64(vec![out, inp], w));
            container.insert(format!("judge.{l}.bias"), RawTensor::from_f64(vec![out], b));
        }
    }

    pub fn from_container(container: &WeightContainer) -> Result<Self> {
        let mut params = Vec::with_capacity(PARAM_COUNT);
        for (l, (out, inp)) in LAYERS.into_iter().enumerate() {
            for (suffix, shape) in [("weight", vec![out, inp]), ("bias", vec![out])] {
                let name = format!("judge.{l}.{suffix}");
                let t = container.get(&name).ok_or_else(|| Error::MissingTensor {
                    layer: l,
                    name: name.clone(),
                })?;
                if t.shape != shape {
                    return Err(Error::TensorShape {
                        layer: l,
                        name,
                        expected: shape,
                        found: t.shape.clone(),
                    });
                }
                let values = t
                    .to_f64()
                    .or_else(|| t.to_f32().map(|v| v.into_iter().map(f64::from).collect()));
                params.extend(values.ok_or_else(|| Error::UnsupportedDtype {
                    layer: l,
                    name,
                    dtype: t.dtype.clone(),
                })?);
            }
        }
        Self::from_params(params)
    }
}
