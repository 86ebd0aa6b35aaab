//! Scoring metrics: 2AFC on ordering-labelled triplets and on BAPPS, JND
//! mean average precision, dataset ingestion and report aggregation.

mod datasets;
mod jnd;
pub mod report;
pub mod stats;
mod two_afc;

use rayon::prelude::*;

use crate::distortions::{make_triplet_seeded, triplet_seed, DistortionOrdering};
use crate::error::{Error, Result};
use crate::metric::PerceptualMetric;

pub use datasets::{
    load_bapps, load_bapps_split, load_image_dir, read_png, write_png, BappsIndex, BappsPart, ImageDir, ImageSource,
    InMemoryImages, BAPPS_EVAL_SPLIT, INDEX_FILE,
};
pub use jnd::{jnd_map, jnd_score, JndSample};
pub use report::{EvalReport, MetricLabel, ScoreKind};
pub use two_afc::{two_afc_from_distances, two_afc_sample_score, two_afc_score, TwoAfcSample};

/// `(d0, d1, J)` for one triplet per image of `source`, labelled by
/// `ordering`. Triplet `i` is drawn from `triplet_seed(seed, i, 0)`.
pub fn ordering_distances<M, S>(
    metric: &M,
    source: &S,
    ordering: &DistortionOrdering,
    seed: u64,
) -> Result<Vec<(f64, f64, f64)>>
where
    M: PerceptualMetric + ?Sized,
    S: ImageSource + ?Sized,
{
    (0..source.len())
        .into_par_iter()
        .map(|i| {
            let img = source.image(i)?;
            let t = make_triplet_seeded(&img, ordering, triplet_seed(seed, i, 0));
            let (d0, d1) = metric.distances(&t.reference, &t.x0, &t.x1)?;
            Ok((d0, d1, t.judgement))
        })
        .collect()
}

/// 2AFC score of `metric` on triplets generated from `source` under
/// `ordering`.
pub fn eval_ordering<M, S>(
    metric: &M,
    label: &MetricLabel,
    source: &S,
    ordering: &DistortionOrdering,
    seed: u64,
) -> Result<EvalReport>
where
    M: PerceptualMetric + ?Sized,
    S: ImageSource + ?Sized,
{
    let triples = ordering_distances(metric, source, ordering, seed)?;
    Ok(EvalReport::new(
        label,
        Some(ordering.to_string()),
        source.id(),
        ScoreKind::TwoAfc,
        two_afc_from_distances(&triples)?,
        triples.len(),
        seed,
    ))
}

/// 2AFC score over a BAPPS 2AFC index, decoding patches as they are scored.
pub fn eval_bapps_two_afc<M: PerceptualMetric + ?Sized>(
    metric: &M,
    label: &MetricLabel,
    index: &BappsIndex,
    dataset: &str,
) -> Result<EvalReport> {
    if index.part() != BappsPart::TwoAfc {
        return Err(Error::Dataset("expected a 2AFC index".into()));
    }
    let triples = (0..index.len())
        .into_par_iter()
        .map(|i| {
            let s = index.two_afc(i)?;
            let (d0, d1) = metric.distances(&s.reference, &s.x0, &s.x1)?;
            Ok((d0, d1, s.judgement))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalReport::new(
        label,
        None,
        dataset,
        ScoreKind::TwoAfc,
        two_afc_from_distances(&triples)?,
        triples.len(),
        0,
    ))
}

pub fn eval_bapps_jnd<M: PerceptualMetric + ?Sized>(
    metric: &M,
    label: &MetricLabel,
    index: &BappsIndex,
    dataset: &str,
) -> Result<EvalReport> {
    if index.part() != BappsPart::Jnd {
        return Err(Error::Dataset("expected a JND index".into()));
    }
    let pairs = (0..index.len())
        .into_par_iter()
        .map(|i| {
            let s = index.jnd(i)?;
            Ok((metric.distance(&s.p0, &s.p1)?, s.same_fraction))
        })
        .collect::<Result<Vec<_>>>()?;
    let (distances, same): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    Ok(EvalReport::new(
        label,
        None,
        dataset,
        ScoreKind::JndMap,
        jnd_map(&distances, &same)?,
        distances.len(),
        0,
    ))
}
