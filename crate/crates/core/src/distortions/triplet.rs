use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{apply, sample_params, DistortionKind, DistortionOrdering, DistortionParams};
use crate::seed;
use crate::tensor_net::ImageTensor;

/// Reference image with two distorted versions and the judgement `J`, the
/// fraction of judges preferring `x1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Triplet {
    pub reference: ImageTensor,
    pub x0: ImageTensor,
    pub x1: ImageTensor,
    pub judgement: f64,
    pub kinds: (DistortionKind, DistortionKind),
    pub params: (DistortionParams, DistortionParams),
}

impl Triplet {
    pub fn record(&self, image: impl Into<String>, seed: u64) -> TripletRecord {
        TripletRecord {
            image: image.into(),
            kinds: [self.kinds.0, self.kinds.1],
            params: [self.params.0, self.params.1],
            judgement: self.judgement,
            seed,
        }
    }
}

/// One line of a triplet manifest; enough to rebuild the triplet exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub image: String,
    pub kinds: [DistortionKind; 2],
    pub params: [DistortionParams; 2],
    #[serde(rename = "J")]
    pub judgement: f64,
    pub seed: u64,
}

impl TripletRecord {
    pub fn replay(&self, img: &ImageTensor) -> Triplet {
        Triplet {
            reference: img.clone(),
            x0: apply(&self.params[0], img),
            x1: apply(&self.params[1], img),
            judgement: self.judgement,
            kinds: (self.kinds[0], self.kinds[1]),
            params: (self.params[0], self.params[1]),
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("record serializes")
    }
}

/// Picks two distinct kinds of `ordering` uniformly, samples their
/// parameters independently and labels `J = 0` when the first kind is the
/// more similar one, else `J = 1`.
///
/// Kinds are drawn from the ordering's set in a fixed canonical order, so
/// orderings over the same kinds produce identical triplets from one seed and
/// differ only in their labels.
pub fn make_triplet(img: &ImageTensor, ordering: &DistortionOrdering, rng: &mut seed::Rng) -> Triplet {
    let mut kinds = ordering.kinds().to_vec();
    kinds.sort();
    let n = kinds.len();
    let i = rng.gen_range(0..n);
    let mut j = rng.gen_range(0..n - 1);
    if j >= i {
        j += 1;
    }
    let (k0, k1) = (kinds[i], kinds[j]);
    let p0 = sample_params(k0, rng);
    let p1 = sample_params(k1, rng);
    let judgement = if ordering.prefers(k0, k1) { 0.0 } else { 1.0 };
    Triplet {
        reference: img.clone(),
        x0: apply(&p0, img),
        x1: apply(&p1, img),
        judgement,
        kinds: (k0, k1),
        params: (p0, p1),
    }
}

/// Seed of the triplet for `image_index` in stream `stream` (epoch or repeat).
pub fn triplet_seed(base: u64, image_index: usize, stream: u64) -> u64 {
    seed::derive(base, &[image_index as u64, stream])
}

pub fn make_triplet_seeded(img: &ImageTensor, ordering: &DistortionOrdering, seed: u64) -> Triplet {
    make_triplet(img, ordering, &mut seed::rng(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distortions::DistortionKind::*;

    fn img() -> ImageTensor {
        ImageTensor::from_fn(8, 8, |c, y, x| ((c + y * 3 + x) % 8) as f32 / 8.0).unwrap()
    }

    #[test]
    fn label_follows_ordering() {
        let o = DistortionOrdering::new(vec![LowerBrightness, ShiftHue, GaussianBlur]).unwrap();
        let mut rng = seed::rng(0);
        for _ in 0..50 {
            let t = make_triplet(&img(), &o, &mut rng);
            assert_ne!(t.kinds.0, t.kinds.1);
            let expect = if o.rank(t.kinds.0) < o.rank(t.kinds.1) {
                0.0
            } else {
                1.0
            };
            assert_eq!(t.judgement, expect);
            assert_eq!(t.params.0.kind(), t.kinds.0);
        }
    }

    #[test]
    fn replay_reproduces_triplet() {
        let o = DistortionOrdering::full(DistortionKind::ALL.to_vec()).unwrap();
        let s = triplet_seed(42, 3, 1);
        let t = make_triplet_seeded(&img(), &o, s);
        let rec = t.record("img3.png", s);
        let line = rec.to_json_line();
        assert!(line.contains("\"J\":"));
        let back: TripletRecord = serde_json::from_str(&line).unwrap();
        assert_eq!(back.replay(&img()), t);
        assert_eq!(make_triplet_seeded(&img(), &o, s), t);
    }
}
