use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense channel-major grid of `f32` values indexed `(channel, row, col)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor3 {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<f32>,
}

impl Tensor3 {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn filled(channels: usize, height: usize, width: usize, value: f32) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![value; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::ShapeMismatch(format!(
                "{} values cannot fill a {channels}x{height}x{width} grid",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn from_fn(
        channels: usize,
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(channels * height * width);
        for c in 0..channels {
            for y in 0..height {
                for x in 0..width {
                    data.push(f(c, y, x));
                }
            }
        }
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.channels, self.height, self.width]
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> f32 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: f32) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    /// One channel's `height * width` plane.
    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn plane_mut(&mut self, c: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Self {
        Self {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Concatenates grids of equal spatial size along the channel axis.
    pub fn concat_channels(parts: &[Tensor3]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::ShapeMismatch("cannot concatenate zero grids".into()))?;
        let (h, w) = (first.height, first.width);
        if parts.iter().any(|p| p.height != h || p.width != w) {
            return Err(Error::ShapeMismatch(
                "channel concatenation needs equal spatial sizes".into(),
            ));
        }
        let channels = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(channels * h * w);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Self {
            channels,
            height: h,
            width: w,
            data,
        })
    }
}

/// One RGB image, values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor(Tensor3);

impl ImageTensor {
    pub fn new(grid: Tensor3) -> Result<Self> {
        if grid.channels() != 3 {
            return Err(Error::InvalidImage(format!(
                "expected 3 channels, got {}",
                grid.channels()
            )));
        }
        if grid.height() == 0 || grid.width() == 0 {
            return Err(Error::InvalidImage("image has an empty dimension".into()));
        }
        if let Some(v) = grid.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!("value {v} outside [0, 1]")));
        }
        Ok(Self(grid))
    }

    /// Builds an image by clamping every value into `[0, 1]`.
    /// Non-finite inputs become 0.
    pub fn from_clamped(mut grid: Tensor3) -> Result<Self> {
        for v in grid.as_mut_slice() {
            *v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        }
        Self::new(grid)
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Result<Self> {
        Self::new(Tensor3::filled(3, height, width, value))
    }

    pub fn from_fn(height: usize, width: usize, f: impl FnMut(usize, usize, usize) -> f32) -> Result<Self> {
        Self::new(Tensor3::from_fn(3, height, width, f))
    }

    /// Converts interleaved 8-bit RGB pixels; `v` maps to `v / 255`.
    pub fn from_rgb8(height: usize, width: usize, pixels: &[u8]) -> Result<Self> {
        if pixels.len() != height * width * 3 {
            return Err(Error::InvalidImage(format!(
                "{} bytes do not form a {height}x{width} RGB image",
                pixels.len()
            )));
        }
        Self::from_fn(height, width, |c, y, x| {
            f32::from(pixels[(y * width + x) * 3 + c]) / 255.0
        })
    }

    /// Interleaved 8-bit RGB, rounding to nearest.
    pub fn to_rgb8(&self) -> Vec<u8> {
        let (h, w) = (self.height(), self.width());
        let mut out = Vec::with_capacity(h * w * 3);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    out.push((self.0.get(c, y, x) * 255.0).round() as u8);
                }
            }
        }
        out
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn grid(&self) -> &Tensor3 {
        &self.0
    }

    pub fn into_grid(self) -> Tensor3 {
        self.0
    }
}

/// Activations at each tap layer of a network, in tap order.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureStack {
    layers: Vec<Tensor3>,
}

impl FeatureStack {
    pub fn new(layers: Vec<Tensor3>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Tensor3] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Tensor3] {
        &mut self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Channel count per layer.
    pub fn channel_counts(&self) -> Vec<usize> {
        self.layers.iter().map(Tensor3::channels).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(Tensor3::is_finite)
    }

    pub fn into_layers(self) -> Vec<Tensor3> {
        self.layers
    }
}
