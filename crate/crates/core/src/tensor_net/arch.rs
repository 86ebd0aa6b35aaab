//! Built-in layer lists for the three loss networks. Layer indices mirror
//! the reference `features` sequences so exported parameter names resolve
//! unchanged.

use super::spec::{LayerSpec, NetworkSpec, Preprocess};

/// AlexNet; taps at the 1st through 5th ReLU.
pub fn alexnet() -> NetworkSpec {
    NetworkSpec::new(
        "alexnet",
        vec![
            LayerSpec::conv(64, 11, 4, 2),
            LayerSpec::relu().tapped(),
            LayerSpec::max_pool(3, 2),
            LayerSpec::conv(192, 5, 1, 2),
            LayerSpec::relu().tapped(),
            LayerSpec::max_pool(3, 2),
            LayerSpec::conv(384, 3, 1, 1),
            LayerSpec::relu().tapped(),
            LayerSpec::conv(256, 3, 1, 1),
            LayerSpec::relu().tapped(),
            LayerSpec::conv(256, 3, 1, 1),
            LayerSpec::relu().tapped(),
            LayerSpec::max_pool(3, 2),
        ],
    )
    .with_preprocess(Preprocess::imagenet())
}

/// SqueezeNet 1.1; taps at the 1st ReLU and the 2nd, 4th, 5th, 6th, 7th and
/// 8th fire modules.
pub fn squeezenet1_1() -> NetworkSpec {
    NetworkSpec::new(
        "squeezenet1_1",
        vec![
            LayerSpec::conv(64, 3, 2, 0),
            LayerSpec::relu().tapped(),
            LayerSpec::max_pool_ceil(3, 2),
            LayerSpec::fire(16, 64, 64),
            LayerSpec::fire(16, 64, 64).tapped(),
            LayerSpec::max_pool_ceil(3, 2),
            LayerSpec::fire(32, 128, 128),
            LayerSpec::fire(32, 128, 128).tapped(),
            LayerSpec::max_pool_ceil(3, 2),
            LayerSpec::fire(48, 192, 192).tapped(),
            LayerSpec::fire(48, 192, 192).tapped(),
            LayerSpec::fire(64, 256, 256).tapped(),
            LayerSpec::fire(64, 256, 256).tapped(),
        ],
    )
    .with_preprocess(Preprocess::imagenet())
}

/// VGG-16; taps at the 2nd, 4th, 7th, 10th and 13th ReLU.
pub fn vgg16() -> NetworkSpec {
    let blocks: [(usize, usize); 5] = [(64, 2), (128, 2), (256, 3), (512, 3), (512, 3)];
    let mut layers = Vec::new();
    for (channels, convs) in blocks {
        for i in 0..convs {
            layers.push(LayerSpec::conv(channels, 3, 1, 1));
            let relu = LayerSpec::relu();
            layers.push(if i + 1 == convs { relu.tapped() } else { relu });
        }
        layers.push(LayerSpec::max_pool(2, 2));
    }
    NetworkSpec::new("vgg16", layers).with_preprocess(Preprocess::imagenet())
}

/// Looks up a built-in architecture by its exporter name.
pub fn by_name(name: &str) -> Option<NetworkSpec> {
    match name {
        "alexnet" => Some(alexnet()),
        "squeezenet1_1" | "squeezenet" => Some(squeezenet1_1()),
        "vgg16" | "vgg" => Some(vgg16()),
        _ => None,
    }
}

/// Two conv layers, each followed by a tapped ReLU.
pub fn toy(hidden: usize, out: usize) -> NetworkSpec {
    NetworkSpec::new(
        "toy",
        vec![
            LayerSpec::conv(hidden, 3, 1, 1),
            LayerSpec::relu().tapped(),
            LayerSpec::conv(out, 3, 2, 1),
            LayerSpec::relu().tapped(),
        ],
    )
    .with_preprocess(Preprocess {
        mean: [0.5; 3],
        std: [0.25; 3],
    })
}
