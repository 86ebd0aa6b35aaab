//! Seeded random parameters for any spec, used for toy networks and tests.

use rand::Rng;

use super::container::WeightContainer;
use super::spec::{LayerKind, NetworkSpec, Preprocess};
use crate::seed;

fn push_conv(c: &mut WeightContainer, rng: &mut seed::Rng, base: &str, shape: [usize; 4]) {
    let fan_in = (shape[1] * shape[2] * shape[3]) as f32;
    let w_bound = (6.0 / fan_in).sqrt();
    let b_bound = 1.0 / fan_in.sqrt();
    let n: usize = shape.iter().product();
    let weight: Vec<f32> = (0..n).map(|_| rng.gen_range(-w_bound..w_bound)).collect();
    let bias: Vec<f32> = (0..shape[0]).map(|_| rng.gen_range(-b_bound..b_bound)).collect();
    c.insert_f32(format!("{base}.weight"), shape.to_vec(), &weight);
    c.insert_f32(format!("{base}.bias"), vec![shape[0]], &bias);
}

/// He-uniform kernels and small uniform biases for every parameterized layer.
/// `preprocess` (or the spec's own statistics) is recorded in `__meta__`.
pub fn random_container(spec: &NetworkSpec, seed: u64, preprocess: Option<&Preprocess>) -> WeightContainer {
    let mut rng = seed::rng(seed);
    let mut c = WeightContainer::new();
    let mut channels = 3;
    for (i, layer) in spec.layers.iter().enumerate() {
        let base = format!("{}{}", spec.param_prefix, i);
        match layer.kind {
            LayerKind::Conv2d {
                out_channels,
                kernel_h,
                kernel_w,
                ..
            } => push_conv(&mut c, &mut rng, &base, [out_channels, channels, kernel_h, kernel_w]),
            LayerKind::Fire {
                squeeze,
                expand1x1,
                expand3x3,
            } => {
                push_conv(&mut c, &mut rng, &format!("{base}.squeeze"), [squeeze, channels, 1, 1]);
                push_conv(
                    &mut c,
                    &mut rng,
                    &format!("{base}.expand1x1"),
                    [expand1x1, squeeze, 1, 1],
                );
                push_conv(
                    &mut c,
                    &mut rng,
                    &format!("{base}.expand3x3"),
                    [expand3x3, squeeze, 3, 3],
                );
            }
            _ => {}
        }
        channels = layer.out_channels(channels);
    }
    if let Some(p) = preprocess.or(spec.preprocess.as_ref()) {
        c.set_preprocess(p);
    }
    c.set_meta("architecture", spec.name.clone().into());
    c
}
