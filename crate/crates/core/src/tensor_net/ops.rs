//! Layer kernels. Convolution lowers to a single GEMM over an im2col buffer.

use super::spec::{conv_out_dim, pool_out_dim};
use super::tensor::Tensor3;

/// Frozen convolution parameters, kernel laid out `out x in x kh x kw`.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub weight: Vec<f32>,
    pub bias: Vec<f32>,
}

impl Conv2d {
    pub fn kernel_shape(&self) -> Vec<usize> {
        vec![self.out_channels, self.in_channels, self.kernel_h, self.kernel_w]
    }

    /// Zero-padded cross-correlation. Caller guarantees a non-empty output.
    pub fn forward(&self, input: &Tensor3) -> Tensor3 {
        debug_assert_eq!(input.channels(), self.in_channels);
        let (h, w) = (input.height(), input.width());
        let oh = conv_out_dim(h, self.kernel_h, self.stride, self.padding).expect("conv output size");
        let ow = conv_out_dim(w, self.kernel_w, self.stride, self.padding).expect("conv output size");
        let k = self.in_channels * self.kernel_h * self.kernel_w;
        let n = oh * ow;

        let cols = if self.kernel_h == 1 && self.kernel_w == 1 && self.stride == 1 && self.padding == 0 {
            input.as_slice().to_vec()
        } else {
            self.im2col(input, oh, ow)
        };

        let mut out = Vec::with_capacity(self.out_channels * n);
        for &b in &self.bias {
            out.extend(std::iter::repeat_n(b, n));
        }
        // out (M x N) = weight (M x K) * cols (K x N) + out
        // SAFETY: weight is M*K, cols is K*N and out is M*N, all row-major
        // with the strides passed here; the buffers do not alias.
        unsafe {
            matrixmultiply::sgemm(
                self.out_channels,
                k,
                n,
                1.0,
                self.weight.as_ptr(),
                k as isize,
                1,
                cols.as_ptr(),
                n as isize,
                1,
                1.0,
                out.as_mut_ptr(),
                n as isize,
                1,
            );
        }
        Tensor3::from_vec(self.out_channels, oh, ow, out).expect("conv output length")
    }

    fn im2col(&self, input: &Tensor3, oh: usize, ow: usize) -> Vec<f32> {
        let (h, w) = (input.height() as isize, input.width() as isize);
        let (kh, kw) = (self.kernel_h, self.kernel_w);
        let n = oh * ow;
        let mut cols = vec![0.0f32; self.in_channels * kh * kw * n];
        let pad = self.padding as isize;
        let stride = self.stride as isize;
        for c in 0..self.in_channels {
            let plane = input.plane(c);
            for ky in 0..kh {
                for kx in 0..kw {
                    let row = ((c * kh + ky) * kw + kx) * n;
                    let dst = &mut cols[row..row + n];
                    for oy in 0..oh {
                        let iy = oy as isize * stride - pad + ky as isize;
                        if iy < 0 || iy >= h {
                            continue;
                        }
                        let src = &plane[(iy * w) as usize..((iy + 1) * w) as usize];
                        for ox in 0..ow {
                            let ix = ox as isize * stride - pad + kx as isize;
                            if ix >= 0 && ix < w {
                                dst[oy * ow + ox] = src[ix as usize];
                            }
                        }
                    }
                }
            }
        }
        cols
    }
}

pub fn relu_in_place(t: &mut Tensor3) {
    for v in t.as_mut_slice() {
        *v = v.max(0.0);
    }
}

pub fn leaky_relu_in_place(t: &mut Tensor3, slope: f32) {
    for v in t.as_mut_slice() {
        if *v < 0.0 {
            *v *= slope;
        }
    }
}

/// Max pooling without padding; windows clipped at the far border in ceil mode.
pub fn max_pool(input: &Tensor3, kernel: usize, stride: usize, ceil_mode: bool) -> Tensor3 {
    let (h, w) = (input.height(), input.width());
    let oh = pool_out_dim(h, kernel, stride, ceil_mode).expect("pool output size");
    let ow = pool_out_dim(w, kernel, stride, ceil_mode).expect("pool output size");
    let mut out = Tensor3::zeros(input.channels(), oh, ow);
    for c in 0..input.channels() {
        let plane = input.plane(c);
        let dst = out.plane_mut(c);
        for oy in 0..oh {
            let y0 = oy * stride;
            let y1 = (y0 + kernel).min(h);
            for ox in 0..ow {
                let x0 = ox * stride;
                let x1 = (x0 + kernel).min(w);
                let mut m = f32::NEG_INFINITY;
                for y in y0..y1 {
                    for &v in &plane[y * w + x0..y * w + x1] {
                        m = m.max(v);
                    }
                }
                dst[oy * ow + ox] = m;
            }
        }
    }
    out
}
