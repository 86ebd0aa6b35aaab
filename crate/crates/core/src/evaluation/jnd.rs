use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::PerceptualMetric;
use crate::tensor_net::ImageTensor;

/// Image pair with the fraction of judges who saw no difference.
#[derive(Clone, Debug, PartialEq)]
pub struct JndSample {
    pub p0: ImageTensor,
    pub p1: ImageTensor,
    pub same_fraction: f64,
}

/// Area under the precision/recall curve with the precision envelope,
/// sampled at every recall change.
fn average_precision(recall: &[f64], precision: &[f64]) -> f64 {
    let mut mrec = Vec::with_capacity(recall.len() + 2);
    mrec.push(0.0);
    mrec.extend_from_slice(recall);
    mrec.push(1.0);
    let mut mpre = Vec::with_capacity(precision.len() + 2);
    mpre.push(0.0);
    mpre.extend_from_slice(precision);
    mpre.push(0.0);
    for i in (0..mpre.len() - 1).rev() {
        mpre[i] = mpre[i].max(mpre[i + 1]);
    }
    (0..mrec.len() - 1)
        .filter(|&i| mrec[i + 1] != mrec[i])
        .map(|i| (mrec[i + 1] - mrec[i]) * mpre[i + 1])
        .sum()
}

/// Soft-label mean average precision of a ranking by ascending distance.
///
/// Each pair counts as `same` relevant and `1 - same` irrelevant. Ties in
/// distance keep input order. Returns 0 when no pair has any relevance.
pub fn jnd_map(distances: &[f64], same: &[f64]) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::EmptySamples);
    }
    if distances.len() != same.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} distances vs {} labels",
            distances.len(),
            same.len()
        )));
    }
    let mut order: Vec<usize> = (0..distances.len()).collect();
    order.sort_by(|&a, &b| distances[a].total_cmp(&distances[b]));
    let total: f64 = same.iter().sum();
    if total <= 0.0 {
        return Ok(0.0);
    }
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut recall = Vec::with_capacity(order.len());
    let mut precision = Vec::with_capacity(order.len());
    for &i in &order {
        tp += same[i];
        fp += 1.0 - same[i];
        recall.push(tp / total);
        precision.push(tp / (tp + fp));
    }
    Ok(average_precision(&recall, &precision))
}

pub fn jnd_score<M: PerceptualMetric + ?Sized>(metric: &M, samples: &[JndSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let distances = samples
        .par_iter()
        .map(|s| metric.distance(&s.p0, &s.p1))
        .collect::<Result<Vec<_>>>()?;
    let same: Vec<f64> = samples.iter().map(|s| s.same_fraction).collect();
    jnd_map(&distances, &same)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_labels_give_the_label() {
        let d = [0.3, 0.1, 0.9, 0.5];
        let s = [0.4; 4];
        let a = jnd_map(&d, &s).unwrap();
        let b = jnd_map(&[0.9, 0.5, 0.3, 0.1], &s).unwrap();
        assert!((a - 0.4).abs() < 1e-12);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn binary_labels_match_hand_ap() {
        // ranking relevance: 1, 0, 1 -> precisions at hits 1 and 2/3 -> envelope AP = 0.5*1 + 0.5*2/3
        let ap = jnd_map(&[0.1, 0.2, 0.3], &[1.0, 0.0, 1.0]).unwrap();
        assert!((ap - (0.5 + 1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn zero_relevance_and_errors() {
        assert_eq!(jnd_map(&[1.0, 2.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert!(jnd_map(&[], &[]).is_err());
        assert!(jnd_map(&[1.0], &[0.5, 0.5]).is_err());
    }
}
