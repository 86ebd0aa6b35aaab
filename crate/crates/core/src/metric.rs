//! A complete image metric: frozen network, comparison method,
//! normalization flag and scalars.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::distortions::Triplet;
use crate::error::Result;
use crate::similarity::{channel_normalize, ComparisonMethod, DistanceTerms, ScalarWeights};
use crate::tensor_net::{FeatureStack, ImageTensor, LoadedNetwork};

fn default_normalize() -> bool {
    true
}

/// How feature stacks are compared; recorded in run manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    pub network: String,
    pub method: ComparisonMethod,
    #[serde(default = "default_normalize")]
    pub normalize: bool,
}

impl MetricSpec {
    pub fn new(network: impl Into<String>, method: ComparisonMethod) -> Self {
        Self {
            network: network.into(),
            method,
            normalize: true,
        }
    }

    pub fn id(&self) -> String {
        format!("{}/{}", self.network, self.method)
    }
}

/// Anything that scores how different two images are (lower = more similar).
pub trait PerceptualMetric: Sync {
    fn distance(&self, a: &ImageTensor, b: &ImageTensor) -> Result<f64>;

    /// `(d(reference, x0), d(reference, x1))`.
    fn distances(&self, reference: &ImageTensor, x0: &ImageTensor, x1: &ImageTensor) -> Result<(f64, f64)> {
        Ok((self.distance(reference, x0)?, self.distance(reference, x1)?))
    }
}

/// Frozen feature extractor shared by every metric built on it.
#[derive(Clone, Debug)]
pub struct FeatureExtractor {
    network: Arc<LoadedNetwork>,
    normalize: bool,
}

impl FeatureExtractor {
    pub fn new(network: Arc<LoadedNetwork>, normalize: bool) -> Self {
        Self { network, normalize }
    }

    pub fn network(&self) -> &Arc<LoadedNetwork> {
        &self.network
    }

    pub fn normalize(&self) -> bool {
        self.normalize
    }

    pub fn features(&self, img: &ImageTensor) -> Result<FeatureStack> {
        let f = self.network.forward_extract(img)?;
        Ok(if self.normalize { channel_normalize(&f) } else { f })
    }

    /// Terms for `(reference, x0)` and `(reference, x1)`, extracting the
    /// reference features once.
    pub fn triplet_terms(&self, method: ComparisonMethod, t: &Triplet) -> Result<(DistanceTerms, DistanceTerms)> {
        let fr = self.features(&t.reference)?;
        let f0 = self.features(&t.x0)?;
        let f1 = self.features(&t.x1)?;
        Ok((
            DistanceTerms::new(method, &fr, &f0)?,
            DistanceTerms::new(method, &fr, &f1)?,
        ))
    }
}

#[derive(Clone, Debug)]
pub struct DpsMetric {
    extractor: FeatureExtractor,
    method: ComparisonMethod,
    weights: ScalarWeights,
}

impl DpsMetric {
    pub fn new(extractor: FeatureExtractor, method: ComparisonMethod, weights: ScalarWeights) -> Self {
        Self {
            extractor,
            method,
            weights,
        }
    }

    /// All scalars equal to 1.
    pub fn baseline(network: Arc<LoadedNetwork>, method: ComparisonMethod, normalize: bool) -> Self {
        let weights = ScalarWeights::ones(&network.tap_channels());
        Self::new(FeatureExtractor::new(network, normalize), method, weights)
    }

    pub fn spec(&self) -> MetricSpec {
        MetricSpec {
            network: self.extractor.network().name().to_string(),
            method: self.method,
            normalize: self.extractor.normalize(),
        }
    }

    pub fn extractor(&self) -> &FeatureExtractor {
        &self.extractor
    }

    pub fn method(&self) -> ComparisonMethod {
        self.method
    }

    pub fn weights(&self) -> &ScalarWeights {
        &self.weights
    }

    pub fn with_weights(&self, weights: ScalarWeights) -> Self {
        Self::new(self.extractor.clone(), self.method, weights)
    }

    pub fn feature_distance(&self, fa: &FeatureStack, fb: &FeatureStack) -> Result<f64> {
        DistanceTerms::new(self.method, fa, fb)?.distance(&self.weights)
    }
}

impl PerceptualMetric for DpsMetric {
    fn distance(&self, a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
        let fa = self.extractor.features(a)?;
        let fb = self.extractor.features(b)?;
        self.feature_distance(&fa, &fb)
    }

    fn distances(&self, reference: &ImageTensor, x0: &ImageTensor, x1: &ImageTensor) -> Result<(f64, f64)> {
        let fr = self.extractor.features(reference)?;
        let d0 = self.feature_distance(&fr, &self.extractor.features(x0)?)?;
        let d1 = self.feature_distance(&fr, &self.extractor.features(x1)?)?;
        Ok((d0, d1))
    }
}

impl<F> PerceptualMetric for F
where
    F: Fn(&ImageTensor, &ImageTensor) -> Result<f64> + Sync,
{
    fn distance(&self, a: &ImageTensor, b: &ImageTensor) -> Result<f64> {
        self(a, b)
    }
}
