//! Independent reference implementations used as test oracles. Nothing
//! here calls into the library's arithmetic.

#![allow(dead_code)]

use dps_core::{FeatureStack, Tensor3};
use rand::Rng;

/// Direct (six nested loops) zero-padded convolution.
pub fn direct_conv(
    input: &Tensor3,
    weight: &[f32],
    bias: &[f32],
    out_channels: usize,
    k: usize,
    stride: usize,
    pad: usize,
) -> Tensor3 {
    let (cin, h, w) = (input.channels(), input.height(), input.width());
    let oh = (h + 2 * pad - k) / stride + 1;
    let ow = (w + 2 * pad - k) / stride + 1;
    let mut out = Tensor3::zeros(out_channels, oh, ow);
    for o in 0..out_channels {
        for y in 0..oh {
            for x in 0..ow {
                let mut acc = f64::from(bias[o]);
                for c in 0..cin {
                    for ky in 0..k {
                        for kx in 0..k {
                            let iy = (y * stride + ky) as isize - pad as isize;
                            let ix = (x * stride + kx) as isize - pad as isize;
                            if iy < 0 || ix < 0 || iy >= h as isize || ix >= w as isize {
                                continue;
                            }
                            let wv = weight[((o * cin + c) * k + ky) * k + kx];
                            acc += f64::from(wv) * f64::from(input.get(c, iy as usize, ix as usize));
                        }
                    }
                }
                out.set(o, y, x, acc as f32);
            }
        }
    }
    out
}

pub fn relu(t: &Tensor3) -> Tensor3 {
    t.map(|v| v.max(0.0))
}

/// Unit L2 norm of the channel vector at every position, zero vectors kept.
pub fn normalize(stack: &FeatureStack) -> Vec<Vec<Vec<f64>>> {
    stack
        .layers()
        .iter()
        .map(|t| {
            let (c, n) = (t.channels(), t.plane_len());
            let mut out = vec![vec![0.0; n]; c];
            for p in 0..n {
                let norm: f64 = (0..c).map(|ch| f64::from(t.plane(ch)[p]).powi(2)).sum::<f64>().sqrt();
                if norm >= 1e-10 {
                    for ch in 0..c {
                        out[ch][p] = f64::from(t.plane(ch)[p]) / norm;
                    }
                }
            }
            out
        })
        .collect()
}

/// A stack as `[layer][channel][position]` f64 values without normalization.
pub fn raw(stack: &FeatureStack) -> Vec<Vec<Vec<f64>>> {
    stack
        .layers()
        .iter()
        .map(|t| {
            (0..t.channels())
                .map(|c| t.plane(c).iter().map(|&v| f64::from(v)).collect())
                .collect()
        })
        .collect()
}

pub fn oracle_spatial(a: &[Vec<Vec<f64>>], b: &[Vec<Vec<f64>>], w: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for l in 0..a.len() {
        let c = a[l].len();
        let n = a[l][0].len();
        let mut s = 0.0;
        for ch in 0..c {
            for p in 0..n {
                let d = w[l][ch] * (a[l][ch][p] - b[l][ch][p]);
                s += d * d;
            }
        }
        total += s / (c * n) as f64;
    }
    total
}

fn channel_means(layer: &[Vec<f64>]) -> Vec<f64> {
    layer
        .iter()
        .map(|ch| ch.iter().sum::<f64>() / ch.len() as f64)
        .collect()
}

pub fn oracle_mean(a: &[Vec<Vec<f64>>], b: &[Vec<Vec<f64>>], w: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for l in 0..a.len() {
        let (ma, mb) = (channel_means(&a[l]), channel_means(&b[l]));
        let c = ma.len();
        total += (0..c).map(|ch| (w[l][ch] * (ma[ch] - mb[ch])).powi(2)).sum::<f64>() / c as f64;
    }
    total
}

pub fn oracle_sort(a: &[Vec<Vec<f64>>], b: &[Vec<Vec<f64>>], w: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    for l in 0..a.len() {
        let (mut ma, mut mb) = (channel_means(&a[l]), channel_means(&b[l]));
        ma.sort_by(|x, y| y.partial_cmp(x).unwrap());
        mb.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let c = ma.len();
        total += (0..c).map(|ch| (w[l][ch] * (ma[ch] - mb[ch])).powi(2)).sum::<f64>() / c as f64;
    }
    total
}

/// Oracle distance for a method name as used by `ComparisonMethod`'s Display.
pub fn oracle_distance(method: &str, a: &[Vec<Vec<f64>>], b: &[Vec<Vec<f64>>], w: &[Vec<f64>]) -> f64 {
    match method {
        "spatial" => oracle_spatial(a, b, w),
        "mean" => oracle_mean(a, b, w),
        "sort" => oracle_sort(a, b, w),
        "spatial_plus_mean" => oracle_spatial(a, b, w) + oracle_mean(a, b, w),
        "spatial_plus_sort" => oracle_spatial(a, b, w) + oracle_sort(a, b, w),
        other => panic!("unknown method {other}"),
    }
}

pub fn random_stack<R: Rng>(rng: &mut R, shapes: &[[usize; 3]]) -> FeatureStack {
    FeatureStack::new(
        shapes
            .iter()
            .map(|&[c, h, w]| Tensor3::from_fn(c, h, w, |_, _, _| rng.gen_range(-2.0..2.0)))
            .collect(),
    )
}

pub fn random_shapes<R: Rng>(rng: &mut R) -> Vec<[usize; 3]> {
    (0..rng.gen_range(1..4))
        .map(|_| [rng.gen_range(1..7), rng.gen_range(1..5), rng.gen_range(1..5)])
        .collect()
}

/// Forward pass of the judge from its layer matrices, written out as plain
/// matrix-vector products. Also returns the sign of every hidden
/// pre-activation.
pub fn oracle_judge(layers: &[(Vec<f64>, Vec<f64>)], input: &[f64; 5]) -> (f64, Vec<bool>) {
    let mut x: Vec<f64> = input.to_vec();
    let mut signs = Vec::new();
    for (l, (w, b)) in layers.iter().enumerate() {
        let out = b.len();
        let inp = x.len();
        assert_eq!(w.len(), out * inp);
        let mut y = vec![0.0; out];
        for o in 0..out {
            let mut acc = b[o];
            for i in 0..inp {
                acc += w[o * inp + i] * x[i];
            }
            y[o] = acc;
        }
        if l + 1 < layers.len() {
            for v in &mut y {
                signs.push(*v > 0.0);
                if *v <= 0.0 {
                    *v *= 0.2;
                }
            }
        }
        x = y;
    }
    (x[0], signs)
}

pub fn oracle_judge_logit(layers: &[(Vec<f64>, Vec<f64>)], input: &[f64; 5]) -> f64 {
    oracle_judge(layers, input).0
}

pub fn judge_input(d0: f64, d1: f64) -> [f64; 5] {
    [d0, d1, d0 - d1, d0 / (d1 + 1e-10), d1 / (d0 + 1e-10)]
}

pub fn logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Cross-entropy with probabilities clamped to `[1e-7, 1 - 1e-7]`.
pub fn oracle_bce(p: f64, t: f64) -> f64 {
    let p = p.clamp(1e-7, 1.0 - 1e-7);
    -t * p.ln() - (1.0 - t) * (1.0 - p).ln()
}

/// A triplet as oracle feature arrays (already normalized if wanted).
pub struct OracleTriplet {
    pub reference: Vec<Vec<Vec<f64>>>,
    pub x0: Vec<Vec<Vec<f64>>>,
    pub x1: Vec<Vec<Vec<f64>>>,
    pub judgement: f64,
}

/// Where the loss is not smooth at the evaluated point.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossShape {
    pub signs: Vec<bool>,
    pub clamped: bool,
}

/// Batch-mean judge BCE plus, when `sync` holds a weight, the weighted
/// synchronizing BCE, from `(d0, d1, J)` triples.
pub fn oracle_loss_from_distances(
    triples: &[(f64, f64, f64)],
    judge: &[(Vec<f64>, Vec<f64>)],
    sync: Option<f64>,
) -> (f64, LossShape) {
    let mut total = 0.0;
    let mut shape = LossShape::default();
    for &(d0, d1, j) in triples {
        let (z, signs) = oracle_judge(judge, &judge_input(d0, d1));
        shape.signs.extend(signs);
        let p = logistic(z);
        shape.clamped |= !(1e-7..=1.0 - 1e-7).contains(&p);
        total += oracle_bce(p, j);
        if let Some(weight) = sync {
            let q = logistic(d0 - d1);
            shape.clamped |= !(1e-7..=1.0 - 1e-7).contains(&q);
            total += weight * oracle_bce(q, j).max(0.0);
        }
    }
    (total / triples.len() as f64, shape)
}

pub fn oracle_triplet_distances(method: &str, batch: &[OracleTriplet], w: &[Vec<f64>]) -> Vec<(f64, f64, f64)> {
    batch
        .iter()
        .map(|t| {
            (
                oracle_distance(method, &t.reference, &t.x0, w),
                oracle_distance(method, &t.reference, &t.x1, w),
                t.judgement,
            )
        })
        .collect()
}

pub fn oracle_batch_loss(
    method: &str,
    batch: &[OracleTriplet],
    w: &[Vec<f64>],
    judge: &[(Vec<f64>, Vec<f64>)],
    sync: Option<f64>,
) -> (f64, LossShape) {
    oracle_loss_from_distances(&oracle_triplet_distances(method, batch, w), judge, sync)
}
