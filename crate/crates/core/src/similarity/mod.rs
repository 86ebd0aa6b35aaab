//! Deep-feature distances with per-channel scalars.
//!
//! Every comparison method is a quadratic form in the scalars: for a fixed
//! pair of feature stacks, `d = sum_l sum_c w[l][c]^2 * a[l][c]`. The
//! coefficients `a` depend only on the features, so [`DistanceTerms`]
//! computes them once and both the distance and its gradient with respect
//! to the scalars are cheap to re-evaluate while the scalars are trained.

mod weights;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_net::{FeatureStack, Tensor3};

pub use weights::{ScalarWeights, WeightsFile};

/// Norms below this are treated as zero by [`channel_normalize`].
pub const EPSILON_NORM: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComparisonMethod {
    Spatial,
    Mean,
    Sort,
    SpatialPlusMean,
    SpatialPlusSort,
}

impl ComparisonMethod {
    pub const ALL: [ComparisonMethod; 5] = [
        ComparisonMethod::Spatial,
        ComparisonMethod::Mean,
        ComparisonMethod::Sort,
        ComparisonMethod::SpatialPlusMean,
        ComparisonMethod::SpatialPlusSort,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ComparisonMethod::Spatial => "spatial",
            ComparisonMethod::Mean => "mean",
            ComparisonMethod::Sort => "sort",
            ComparisonMethod::SpatialPlusMean => "spatial_plus_mean",
            ComparisonMethod::SpatialPlusSort => "spatial_plus_sort",
        }
    }

    fn parts(self) -> &'static [Part] {
        match self {
            ComparisonMethod::Spatial => &[Part::Spatial],
            ComparisonMethod::Mean => &[Part::Mean],
            ComparisonMethod::Sort => &[Part::Sort],
            ComparisonMethod::SpatialPlusMean => &[Part::Spatial, Part::Mean],
            ComparisonMethod::SpatialPlusSort => &[Part::Spatial, Part::Sort],
        }
    }
}

impl fmt::Display for ComparisonMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ComparisonMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '+'], "_").as_str() {
            "spatial" => Ok(ComparisonMethod::Spatial),
            "mean" => Ok(ComparisonMethod::Mean),
            "sort" => Ok(ComparisonMethod::Sort),
            "spatial_plus_mean" | "spatial_mean" => Ok(ComparisonMethod::SpatialPlusMean),
            "spatial_plus_sort" | "spatial_sort" => Ok(ComparisonMethod::SpatialPlusSort),
            _ => Err(Error::Config(format!("unknown comparison method `{s}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Part {
    Spatial,
    Mean,
    Sort,
}

/// Unit-L2 channel vector at every spatial position of every layer.
/// Positions whose norm is below [`EPSILON_NORM`] become all-zero.
pub fn channel_normalize(feats: &FeatureStack) -> FeatureStack {
    let layers = feats
        .layers()
        .iter()
        .map(|t| {
            let mut out = t.clone();
            let (c, n) = (t.channels(), t.plane_len());
            let data = out.as_mut_slice();
            for p in 0..n {
                let norm = (0..c)
                    .map(|ch| {
                        let v = f64::from(data[ch * n + p]);
                        v * v
                    })
                    .sum::<f64>()
                    .sqrt();
                if norm < EPSILON_NORM {
                    for ch in 0..c {
                        data[ch * n + p] = 0.0;
                    }
                } else {
                    for ch in 0..c {
                        data[ch * n + p] = (f64::from(data[ch * n + p]) / norm) as f32;
                    }
                }
            }
            out
        })
        .collect();
    FeatureStack::new(layers)
}

/// Spatial mean of each channel, accumulated in `f64`.
pub fn pooled(t: &Tensor3) -> Vec<f64> {
    let n = t.plane_len() as f64;
    (0..t.channels())
        .map(|c| t.plane(c).iter().map(|&v| f64::from(v)).sum::<f64>() / n)
        .collect()
}

/// Pooled channel vector and its descending-sorted copy for one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct PooledFeatures {
    pub mean: Vec<f64>,
    pub sorted: Vec<f64>,
}

impl PooledFeatures {
    pub fn new(t: &Tensor3) -> Self {
        Self::from_mean(pooled(t))
    }

    pub fn from_mean(mean: Vec<f64>) -> Self {
        let mut sorted = mean.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        Self { mean, sorted }
    }
}

fn check_shapes(fx: &FeatureStack, fx0: &FeatureStack) -> Result<()> {
    if fx.len() != fx0.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} layers vs {} layers",
            fx.len(),
            fx0.len()
        )));
    }
    for (l, (a, b)) in fx.layers().iter().zip(fx0.layers()).enumerate() {
        if a.shape() != b.shape() {
            return Err(Error::ShapeMismatch(format!(
                "layer {l}: {:?} vs {:?}",
                a.shape(),
                b.shape()
            )));
        }
    }
    Ok(())
}

fn spatial_coefficients(a: &Tensor3, b: &Tensor3) -> Vec<f64> {
    let denom = (a.channels() * a.plane_len()) as f64;
    (0..a.channels())
        .map(|c| {
            a.plane(c)
                .iter()
                .zip(b.plane(c))
                .map(|(&x, &y)| {
                    let d = f64::from(x) - f64::from(y);
                    d * d
                })
                .sum::<f64>()
                / denom
        })
        .collect()
}

fn vector_coefficients(x: &[f64], y: &[f64]) -> Vec<f64> {
    let c = x.len() as f64;
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let d = a - b;
            d * d / c
        })
        .collect()
}

/// Per-channel coefficients of one distance component.
#[derive(Clone, Debug, PartialEq)]
struct PartTerms {
    per_layer: Vec<Vec<f64>>,
}

impl PartTerms {
    fn value(&self, w: &ScalarWeights) -> f64 {
        self.per_layer
            .iter()
            .zip(w.layers())
            .map(|(a, wl)| a.iter().zip(wl).map(|(a, w)| w * w * a).sum::<f64>())
            .sum()
    }
}

/// Precomputed quadratic-form coefficients for one pair of feature stacks
/// under one comparison method.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceTerms {
    method: ComparisonMethod,
    parts: Vec<PartTerms>,
}

impl DistanceTerms {
    /// Features are compared as given; normalize beforehand if wanted.
    pub fn new(method: ComparisonMethod, fx: &FeatureStack, fx0: &FeatureStack) -> Result<Self> {
        check_shapes(fx, fx0)?;
        let parts = method
            .parts()
            .iter()
            .map(|part| {
                let per_layer = fx
                    .layers()
                    .iter()
                    .zip(fx0.layers())
                    .map(|(a, b)| match part {
                        Part::Spatial => spatial_coefficients(a, b),
                        Part::Mean => vector_coefficients(&pooled(a), &pooled(b)),
                        Part::Sort => {
                            let (pa, pb) = (PooledFeatures::new(a), PooledFeatures::new(b));
                            vector_coefficients(&pa.sorted, &pb.sorted)
                        }
                    })
                    .collect();
                PartTerms { per_layer }
            })
            .collect();
        Ok(Self { method, parts })
    }

    pub fn method(&self) -> ComparisonMethod {
        self.method
    }

    /// Channel count per layer.
    pub fn channel_counts(&self) -> Vec<usize> {
        self.parts[0].per_layer.iter().map(Vec::len).collect()
    }

    fn check_weights(&self, w: &ScalarWeights) -> Result<()> {
        if w.channel_counts() != self.channel_counts() {
            return Err(Error::ShapeMismatch(format!(
                "scalars have channels {:?}, features have {:?}",
                w.channel_counts(),
                self.channel_counts()
            )));
        }
        Ok(())
    }

    /// Combined methods add their component distances in fixed order.
    pub fn distance(&self, w: &ScalarWeights) -> Result<f64> {
        self.check_weights(w)?;
        Ok(self.distance_unchecked(w))
    }

    pub(crate) fn distance_unchecked(&self, w: &ScalarWeights) -> f64 {
        match self.parts.as_slice() {
            [p] => p.value(w),
            [p, q] => p.value(w) + q.value(w),
            _ => unreachable!("methods have one or two parts"),
        }
    }

    /// `d d / d w[l][c] = 2 w[l][c] a[l][c]`, summed over components.
    pub fn grad(&self, w: &ScalarWeights) -> Result<Vec<Vec<f64>>> {
        self.check_weights(w)?;
        let mut g: Vec<Vec<f64>> = w.layers().iter().map(|l| vec![0.0; l.len()]).collect();
        self.accumulate_grad(w, 1.0, &mut g);
        Ok(g)
    }

    /// Adds `scale * d d / d w` into `out`.
    pub(crate) fn accumulate_grad(&self, w: &ScalarWeights, scale: f64, out: &mut [Vec<f64>]) {
        for part in &self.parts {
            for ((a, wl), gl) in part.per_layer.iter().zip(w.layers()).zip(out.iter_mut()) {
                for ((a, w), g) in a.iter().zip(wl).zip(gl.iter_mut()) {
                    *g += scale * 2.0 * w * a;
                }
            }
        }
    }
}

fn single(part: ComparisonMethod, fx: &FeatureStack, fx0: &FeatureStack, w: &ScalarWeights) -> Result<f64> {
    DistanceTerms::new(part, fx, fx0)?.distance(w)
}

/// Per layer `1/(C H W) * sum_{c,h,w} (w_c * (z_x - z_x0))^2`, summed over layers.
pub fn d_spatial(fx: &FeatureStack, fx0: &FeatureStack, w: &ScalarWeights) -> Result<f64> {
    single(ComparisonMethod::Spatial, fx, fx0, w)
}

/// Per layer `1/C * ||w ⊙ (mean_x - mean_x0)||^2` on spatially pooled channels.
pub fn d_mean(fx: &FeatureStack, fx0: &FeatureStack, w: &ScalarWeights) -> Result<f64> {
    single(ComparisonMethod::Mean, fx, fx0, w)
}

/// As [`d_mean`], with each pooled vector sorted descending first.
pub fn d_sort(fx: &FeatureStack, fx0: &FeatureStack, w: &ScalarWeights) -> Result<f64> {
    single(ComparisonMethod::Sort, fx, fx0, w)
}

pub fn distance(method: ComparisonMethod, fx: &FeatureStack, fx0: &FeatureStack, w: &ScalarWeights) -> Result<f64> {
    DistanceTerms::new(method, fx, fx0)?.distance(w)
}

/// Analytic gradient of [`distance`] with respect to every scalar. For sort
/// the ordering permutation is whatever the forward pass produced.
pub fn distance_grad_w(
    method: ComparisonMethod,
    fx: &FeatureStack,
    fx0: &FeatureStack,
    w: &ScalarWeights,
) -> Result<Vec<Vec<f64>>> {
    DistanceTerms::new(method, fx, fx0)?.grad(w)
}
