use super::DistortionParams;
use crate::tensor_net::{ImageTensor, Tensor3};

/// Bilinear sample at continuous pixel coordinates; pixels outside the
/// image contribute black.
fn sample_bilinear(plane: &[f32], h: usize, w: usize, sy: f64, sx: f64) -> f64 {
    let y0 = sy.floor();
    let x0 = sx.floor();
    let fy = sy - y0;
    let fx = sx - x0;
    let at = |y: f64, x: f64| -> f64 {
        if y < 0.0 || x < 0.0 || y >= h as f64 || x >= w as f64 {
            0.0
        } else {
            f64::from(plane[y as usize * w + x as usize])
        }
    };
    let mut v = 0.0;
    for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
        if wy == 0.0 {
            continue;
        }
        for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
            if wx == 0.0 {
                continue;
            }
            v += wy * wx * at(y0 + dy, x0 + dx);
        }
    }
    v
}

/// Inverse-maps every output pixel through `source` (output offsets from the
/// image center to source coordinates) and samples bilinearly.
fn warp(img: &ImageTensor, source: impl Fn(f64, f64) -> (f64, f64)) -> Tensor3 {
    let g = img.grid();
    let (h, w) = (g.height(), g.width());
    let cy = (h as f64 - 1.0) / 2.0;
    let cx = (w as f64 - 1.0) / 2.0;
    let mut out = Tensor3::zeros(3, h, w);
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = source(y as f64 - cy, x as f64 - cx);
            for c in 0..3 {
                let v = sample_bilinear(g.plane(c), h, w, sy + cy, sx + cx);
                out.set(c, y, x, v as f32);
            }
        }
    }
    out
}

fn rotate(img: &ImageTensor, degrees: f64) -> Tensor3 {
    // Counter-clockwise on screen (rows grow downward).
    let (s, c) = degrees.to_radians().sin_cos();
    warp(img, |dy, dx| (dx * s + dy * c, dx * c - dy * s))
}

fn translate(img: &ImageTensor, fx: f64, fy: f64) -> Tensor3 {
    let ox = fx * img.width() as f64;
    let oy = fy * img.height() as f64;
    warp(img, |dy, dx| (dy - oy, dx - ox))
}

fn zoom_in(img: &ImageTensor, scale: f64) -> Tensor3 {
    warp(img, |dy, dx| (dy / scale, dx / scale))
}

fn brightness(img: &ImageTensor, factor: f64) -> Tensor3 {
    img.grid().map(|v| (f64::from(v) * factor) as f32)
}

/// RGB in `[0, 1]` to (hue in `[0, 1)`, saturation, value).
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta <= 0.0 {
        return (0.0, s, v);
    }
    let h = if max == r {
        ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        (b - r) / delta + 2.0
    } else {
        (r - g) / delta + 4.0
    };
    ((h / 6.0).rem_euclid(1.0), s, v)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as i32 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

fn shift_hue(img: &ImageTensor, hue_factor: f64) -> Tensor3 {
    let g = img.grid();
    let mut out = g.clone();
    let n = g.plane_len();
    let src = g.as_slice();
    let dst = out.as_mut_slice();
    for p in 0..n {
        let (h, s, v) = rgb_to_hsv(f64::from(src[p]), f64::from(src[n + p]), f64::from(src[2 * n + p]));
        let (r, gg, b) = hsv_to_rgb((h + hue_factor).rem_euclid(1.0), s, v);
        dst[p] = r as f32;
        dst[n + p] = gg as f32;
        dst[2 * n + p] = b as f32;
    }
    out
}

/// Gaussian weights at integer offsets `-r..=r`, normalized to sum 1.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let x = i as f64 - r;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Mirror index without repeating the edge sample, folded as often as needed.
fn reflect(i: isize, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as isize - 1);
    let m = i.rem_euclid(period);
    if m >= n as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

fn gaussian_blur(img: &ImageTensor, size: usize, sigma: f64) -> Tensor3 {
    let kernel = gaussian_kernel(size, sigma);
    let r = (size / 2) as isize;
    let g = img.grid();
    let (h, w) = (g.height(), g.width());
    let mut out = Tensor3::zeros(3, h, w);
    let mut tmp = vec![0.0f64; h * w];
    for c in 0..3 {
        let plane = g.plane(c);
        for y in 0..h {
            for x in 0..w {
                tmp[y * w + x] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, kv)| kv * f64::from(plane[y * w + reflect(x as isize + k as isize - r, w)]))
                    .sum();
            }
        }
        let dst = out.plane_mut(c);
        for y in 0..h {
            for x in 0..w {
                dst[y * w + x] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, kv)| kv * tmp[reflect(y as isize + k as isize - r, h) * w + x])
                    .sum::<f64>() as f32;
            }
        }
    }
    out
}

/// Applies one distortion. The result has the input's size and is clamped
/// to `[0, 1]`; geometric warps fill uncovered pixels with black.
pub fn apply(params: &DistortionParams, img: &ImageTensor) -> ImageTensor {
    let out = match *params {
        DistortionParams::Rotate { degrees } => rotate(img, degrees),
        DistortionParams::Translate { dx, dy } => translate(img, dx, dy),
        DistortionParams::LowerBrightness { factor } => brightness(img, factor),
        DistortionParams::ShiftHue { hue_factor } => shift_hue(img, hue_factor),
        DistortionParams::GaussianBlur { kernel, sigma } => gaussian_blur(img, kernel, sigma),
        DistortionParams::ZoomIn { scale } => zoom_in(img, scale),
    };
    ImageTensor::from_clamped(out).expect("distortions keep a valid 3-channel shape")
}
