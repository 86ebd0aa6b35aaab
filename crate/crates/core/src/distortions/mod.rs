//! The six image distortions, their parameter intervals, similarity
//! orderings over them and labelled triplet generation.

mod apply;
mod ordering;
mod triplet;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use apply::{apply, gaussian_kernel, hsv_to_rgb, rgb_to_hsv};
pub use ordering::DistortionOrdering;
pub use triplet::{make_triplet, make_triplet_seeded, triplet_seed, Triplet, TripletRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionKind {
    Rotate,
    Translate,
    LowerBrightness,
    ShiftHue,
    GaussianBlur,
    ZoomIn,
}

impl DistortionKind {
    pub const ALL: [DistortionKind; 6] = [
        DistortionKind::Rotate,
        DistortionKind::Translate,
        DistortionKind::LowerBrightness,
        DistortionKind::ShiftHue,
        DistortionKind::GaussianBlur,
        DistortionKind::ZoomIn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistortionKind::Rotate => "rotate",
            DistortionKind::Translate => "translate",
            DistortionKind::LowerBrightness => "lower_brightness",
            DistortionKind::ShiftHue => "shift_hue",
            DistortionKind::GaussianBlur => "gaussian_blur",
            DistortionKind::ZoomIn => "zoom_in",
        }
    }
}

impl fmt::Display for DistortionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistortionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DistortionKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidOrdering(format!("unknown distortion `{s}`")))
    }
}

pub const ROTATE_DEGREES: (f64, f64) = (30.0, 330.0);
pub const TRANSLATE_FRACTION: (f64, f64) = (-0.5, 0.5);
pub const BRIGHTNESS_FACTOR: (f64, f64) = (0.1, 0.5);
pub const HUE_FACTOR: (f64, f64) = (-0.5, 0.5);
pub const BLUR_KERNELS: [usize; 6] = [11, 13, 15, 17, 19, 21];
pub const BLUR_SIGMA: (f64, f64) = (4.0, 10.0);
pub const ZOOM_SCALE: (f64, f64) = (1.1, 2.0);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DistortionParams {
    Rotate {
        degrees: f64,
    },
    /// Offsets as fractions of width (`dx`) and height (`dy`).
    Translate {
        dx: f64,
        dy: f64,
    },
    LowerBrightness {
        factor: f64,
    },
    ShiftHue {
        hue_factor: f64,
    },
    GaussianBlur {
        kernel: usize,
        sigma: f64,
    },
    ZoomIn {
        scale: f64,
    },
}

impl DistortionParams {
    pub fn kind(&self) -> DistortionKind {
        match self {
            DistortionParams::Rotate { .. } => DistortionKind::Rotate,
            DistortionParams::Translate { .. } => DistortionKind::Translate,
            DistortionParams::LowerBrightness { .. } => DistortionKind::LowerBrightness,
            DistortionParams::ShiftHue { .. } => DistortionKind::ShiftHue,
            DistortionParams::GaussianBlur { .. } => DistortionKind::GaussianBlur,
            DistortionParams::ZoomIn { .. } => DistortionKind::ZoomIn,
        }
    }

    /// Whether every parameter lies in its sampling interval.
    pub fn in_range(&self) -> bool {
        let within = |v: f64, (lo, hi): (f64, f64)| (lo..=hi).contains(&v);
        match *self {
            DistortionParams::Rotate { degrees } => within(degrees, ROTATE_DEGREES),
            DistortionParams::Translate { dx, dy } => within(dx, TRANSLATE_FRACTION) && within(dy, TRANSLATE_FRACTION),
            DistortionParams::LowerBrightness { factor } => within(factor, BRIGHTNESS_FACTOR),
            DistortionParams::ShiftHue { hue_factor } => within(hue_factor, HUE_FACTOR),
            DistortionParams::GaussianBlur { kernel, sigma } => {
                BLUR_KERNELS.contains(&kernel) && within(sigma, BLUR_SIGMA)
            }
            DistortionParams::ZoomIn { scale } => within(scale, ZOOM_SCALE),
        }
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    rng.gen_range(lo..=hi)
}

/// Draws parameters uniformly from the interval of `kind`. Blur kernel
/// sizes are uniform over the odd sizes 11 to 21.
pub fn sample_params<R: Rng + ?Sized>(kind: DistortionKind, rng: &mut R) -> DistortionParams {
    match kind {
        DistortionKind::Rotate => DistortionParams::Rotate {
            degrees: uniform(rng, ROTATE_DEGREES),
        },
        DistortionKind::Translate => DistortionParams::Translate {
            dx: uniform(rng, TRANSLATE_FRACTION),
            dy: uniform(rng, TRANSLATE_FRACTION),
        },
        DistortionKind::LowerBrightness => DistortionParams::LowerBrightness {
            factor: uniform(rng, BRIGHTNESS_FACTOR),
        },
        DistortionKind::ShiftHue => DistortionParams::ShiftHue {
            hue_factor: uniform(rng, HUE_FACTOR),
        },
        DistortionKind::GaussianBlur => DistortionParams::GaussianBlur {
            kernel: BLUR_KERNELS[rng.gen_range(0..BLUR_KERNELS.len())],
            sigma: uniform(rng, BLUR_SIGMA),
        },
        DistortionKind::ZoomIn => DistortionParams::ZoomIn {
            scale: uniform(rng, ZOOM_SCALE),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn sampled_params_respect_intervals() {
        let mut rng = seed::rng(3);
        for _ in 0..2000 {
            for kind in DistortionKind::ALL {
                let p = sample_params(kind, &mut rng);
                assert_eq!(p.kind(), kind);
                assert!(p.in_range(), "{p:?}");
            }
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let a: Vec<_> = DistortionKind::ALL
            .iter()
            .map(|&k| sample_params(k, &mut seed::rng(9)))
            .collect();
        let b: Vec<_> = DistortionKind::ALL
            .iter()
            .map(|&k| sample_params(k, &mut seed::rng(9)))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn every_kernel_size_is_drawn() {
        let mut rng = seed::rng(1);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..500 {
            if let DistortionParams::GaussianBlur { kernel, .. } = sample_params(DistortionKind::GaussianBlur, &mut rng)
            {
                seen.insert(kernel);
            }
        }
        assert_eq!(seen.into_iter().collect::<Vec<_>>(), BLUR_KERNELS.to_vec());
    }

    #[test]
    fn params_serialize_with_kind_tag() {
        let p = DistortionParams::GaussianBlur { kernel: 13, sigma: 5.5 };
        let v = serde_json::to_value(p).unwrap();
        assert_eq!(v["kind"], "gaussian_blur");
        assert_eq!(v["kernel"], 13);
        let back: DistortionParams = serde_json::from_value(v).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn kind_names_parse() {
        for k in DistortionKind::ALL {
            assert_eq!(k.name().parse::<DistortionKind>().unwrap(), k);
        }
        assert!("flip".parse::<DistortionKind>().is_err());
    }
}
