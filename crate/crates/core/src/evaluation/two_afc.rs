use rayon::prelude::*;

use super::stats::pairwise_sum;
use crate::error::{Error, Result};
use crate::metric::PerceptualMetric;
use crate::tensor_net::ImageTensor;

/// Reference with two candidates and the fraction `J` of judgements
/// preferring `x1`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoAfcSample {
    pub reference: ImageTensor,
    pub x0: ImageTensor,
    pub x1: ImageTensor,
    pub judgement: f64,
}

/// `J` when `d1 < d0` strictly, otherwise `1 - J` (ties included).
#[inline]
pub fn two_afc_sample_score(d0: f64, d1: f64, judgement: f64) -> f64 {
    if d1 < d0 {
        judgement
    } else {
        1.0 - judgement
    }
}

/// Mean per-sample score over `(d0, d1, J)` triples.
pub fn two_afc_from_distances(samples: &[(f64, f64, f64)]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let scores: Vec<f64> = samples
        .iter()
        .map(|&(d0, d1, j)| two_afc_sample_score(d0, d1, j))
        .collect();
    Ok(pairwise_sum(&scores) / scores.len() as f64)
}

/// Scores `metric` over `samples`, evaluating samples in parallel.
pub fn two_afc_score<M: PerceptualMetric + ?Sized>(metric: &M, samples: &[TwoAfcSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let triples = samples
        .par_iter()
        .map(|s| {
            let (d0, d1) = metric.distances(&s.reference, &s.x0, &s.x1)?;
            Ok((d0, d1, s.judgement))
        })
        .collect::<Result<Vec<_>>>()?;
    two_afc_from_distances(&triples)
}
