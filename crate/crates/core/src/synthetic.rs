//! Seeded synthetic images: a colour gradient background, soft coloured
//! blobs and an oriented stripe texture. Used for smoke runs and tests
//! where no real dataset is available.

use rand::Rng;

use crate::seed;
use crate::tensor_net::{ImageTensor, Tensor3};

struct Blob {
    cy: f32,
    cx: f32,
    radius: f32,
    color: [f32; 3],
}

pub fn image(height: usize, width: usize, seed: u64) -> ImageTensor {
    let mut rng = seed::rng(seed);
    let mut color = || [rng.gen::<f32>(), rng.gen::<f32>(), rng.gen::<f32>()];
    let (top, bottom) = (color(), color());
    let blobs: Vec<Blob> = (0..rng.gen_range(2..5))
        .map(|_| Blob {
            cy: rng.gen_range(0.0..height as f32),
            cx: rng.gen_range(0.0..width as f32),
            radius: rng.gen_range(0.15..0.4) * height.min(width) as f32,
            color: [rng.gen(), rng.gen(), rng.gen()],
        })
        .collect();
    let angle: f32 = rng.gen_range(0.0..std::f32::consts::PI);
    let freq: f32 = rng.gen_range(0.6..1.6);
    let amp: f32 = rng.gen_range(0.05..0.2);
    let (sin, cos) = angle.sin_cos();

    let mut grid = Tensor3::zeros(3, height, width);
    for y in 0..height {
        let t = y as f32 / (height.max(2) - 1) as f32;
        for x in 0..width {
            let mut px = [0f32; 3];
            for c in 0..3 {
                px[c] = top[c] * (1.0 - t) + bottom[c] * t;
            }
            for b in &blobs {
                let d2 = (y as f32 - b.cy).powi(2) + (x as f32 - b.cx).powi(2);
                let a = (-d2 / (2.0 * b.radius * b.radius)).exp();
                for c in 0..3 {
                    px[c] = px[c] * (1.0 - a) + b.color[c] * a;
                }
            }
            let stripe = amp * (freq * (x as f32 * cos + y as f32 * sin)).sin();
            for c in 0..3 {
                grid.set(c, y, x, px[c] + stripe);
            }
        }
    }
    ImageTensor::from_clamped(grid).expect("three non-empty channels")
}

/// `count` images with seeds derived from `seed`.
pub fn images(count: usize, height: usize, width: usize, seed: u64) -> Vec<ImageTensor> {
    (0..count)
        .map(|i| image(height, width, seed::derive(seed, &[i as u64])))
        .collect()
}

/// Deterministic smooth colour gradient pattern, the same for every call.
pub fn gradient_pattern(height: usize, width: usize) -> ImageTensor {
    ImageTensor::from_fn(height, width, |c, y, x| {
        let u = x as f32 / (width.max(2) - 1) as f32;
        let v = y as f32 / (height.max(2) - 1) as f32;
        match c {
            0 => u,
            1 => v,
            _ => 0.5 * (u + v),
        }
    })
    .expect("three non-empty channels")
}
