mod common;

use dps_core::seed;
use dps_core::similarity::{
    channel_normalize, d_mean, d_sort, d_spatial, distance, distance_grad_w, ComparisonMethod, PooledFeatures,
    ScalarWeights, WeightsFile,
};
use dps_core::{Error, FeatureStack, Tensor3};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn stack1(c: usize, h: usize, w: usize, v: &[f32]) -> FeatureStack {
    FeatureStack::new(vec![Tensor3::from_vec(c, h, w, v.to_vec()).unwrap()])
}

fn random_weights<R: Rng>(rng: &mut R, stack: &FeatureStack) -> ScalarWeights {
    ScalarWeights::from_layers(
        stack
            .channel_counts()
            .iter()
            .map(|&c| (0..c).map(|_| rng.gen_range(0.0..2.0)).collect())
            .collect(),
    )
    .unwrap()
}

#[test]
fn hand_examples() {
    let one = ScalarWeights::ones(&[2]);
    let a = stack1(2, 1, 1, &[1.0, 2.0]);
    let z = stack1(2, 1, 1, &[0.0, 0.0]);
    assert!((d_spatial(&a, &z, &one).unwrap() - 2.5).abs() < 1e-12);

    let a = stack1(1, 2, 2, &[0.0, 0.0, 2.0, 2.0]);
    let b = stack1(1, 2, 2, &[1.0, 1.0, 1.0, 1.0]);
    assert_eq!(d_mean(&a, &b, &ScalarWeights::ones(&[1])).unwrap(), 0.0);

    let a = stack1(2, 1, 1, &[1.0, 3.0]);
    let b = stack1(2, 1, 1, &[0.0, 1.0]);
    let w = ScalarWeights::from_layers(vec![vec![2.0, 1.0]]).unwrap();
    assert!((d_mean(&a, &b, &w).unwrap() - 4.0).abs() < 1e-12);

    let a = stack1(3, 1, 1, &[1.0, 3.0, 2.0]);
    let b = stack1(3, 1, 1, &[3.0, 2.0, 1.0]);
    assert_eq!(d_sort(&a, &b, &ScalarWeights::ones(&[3])).unwrap(), 0.0);

    let a = stack1(2, 1, 1, &[4.0, 0.0]);
    let b = stack1(2, 1, 1, &[1.0, 1.0]);
    assert!((d_sort(&a, &b, &one).unwrap() - 5.0).abs() < 1e-12);
}

#[test]
fn additivity_example() {
    // d_spatial = 2.5 and d_mean = ((2*1)^2 + (1*2)^2)/2 ... on one stack pair
    let a = stack1(2, 1, 1, &[1.0, 3.0]);
    let b = stack1(2, 1, 1, &[0.0, 1.0]);
    let w = ScalarWeights::ones(&[2]);
    let s = d_spatial(&a, &b, &w).unwrap();
    let m = d_mean(&a, &b, &w).unwrap();
    assert!((s - 2.5).abs() < 1e-12);
    assert_eq!(distance(ComparisonMethod::SpatialPlusMean, &a, &b, &w).unwrap(), s + m);
}

#[test]
fn normalization_examples() {
    let n = channel_normalize(&stack1(2, 1, 1, &[3.0, 4.0]));
    let v = n.layers()[0].as_slice();
    assert!((v[0] - 0.6).abs() < 1e-7 && (v[1] - 0.8).abs() < 1e-7);
    let n = channel_normalize(&stack1(2, 1, 1, &[0.0, 0.0]));
    assert_eq!(n.layers()[0].as_slice(), &[0.0, 0.0]);
}

#[test]
fn normalized_positions_have_unit_or_zero_norm() {
    let mut rng = seed::rng(3);
    for _ in 0..50 {
        let shapes = common::random_shapes(&mut rng);
        let mut s = common::random_stack(&mut rng, &shapes);
        // force a few exact-zero positions
        if let Some(t) = s.layers_mut().first_mut() {
            for c in 0..t.channels() {
                t.plane_mut(c)[0] = 0.0;
            }
        }
        let n = channel_normalize(&s);
        for t in n.layers() {
            for p in 0..t.plane_len() {
                let norm: f64 = (0..t.channels())
                    .map(|c| f64::from(t.plane(c)[p]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(norm == 0.0 || (norm - 1.0).abs() <= 1e-5, "{norm}");
            }
        }
    }
}

#[test]
fn shape_mismatch_is_an_error() {
    let a = stack1(2, 1, 1, &[1.0, 2.0]);
    let b = stack1(2, 1, 2, &[1.0, 2.0, 3.0, 4.0]);
    let w = ScalarWeights::ones(&[2]);
    assert!(matches!(d_spatial(&a, &b, &w), Err(Error::ShapeMismatch(_))));
    assert!(d_mean(&a, &a, &ScalarWeights::ones(&[3])).is_err());
}

#[test]
fn matches_oracle_for_every_method() {
    let mut rng = seed::rng(11);
    for _ in 0..100 {
        let shapes = common::random_shapes(&mut rng);
        let a = common::random_stack(&mut rng, &shapes);
        let b = common::random_stack(&mut rng, &shapes);
        let w = random_weights(&mut rng, &a);
        let (ra, rb) = (common::raw(&a), common::raw(&b));
        for m in ComparisonMethod::ALL {
            let got = distance(m, &a, &b, &w).unwrap();
            let want = common::oracle_distance(&m.to_string(), &ra, &rb, w.layers());
            assert!((got - want).abs() <= 1e-9 * want.max(1.0), "{m}: {got} vs {want}");
        }
    }
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = seed::rng(12);
    let h = 1e-3;
    for _ in 0..100 {
        let shapes = common::random_shapes(&mut rng);
        let a = common::random_stack(&mut rng, &shapes);
        let b = common::random_stack(&mut rng, &shapes);
        let w = random_weights(&mut rng, &a);
        let (ra, rb) = (common::raw(&a), common::raw(&b));
        for m in ComparisonMethod::ALL {
            let g = distance_grad_w(m, &a, &b, &w).unwrap();
            for l in 0..w.layers().len() {
                for c in 0..w.layers()[l].len() {
                    let mut plus = w.layers().to_vec();
                    let mut minus = w.layers().to_vec();
                    plus[l][c] += h;
                    minus[l][c] -= h;
                    let fd = (common::oracle_distance(&m.to_string(), &ra, &rb, &plus)
                        - common::oracle_distance(&m.to_string(), &ra, &rb, &minus))
                        / (2.0 * h);
                    let err = (g[l][c] - fd).abs() / fd.abs().max(g[l][c].abs()).max(1e-8);
                    assert!(
                        err < 1e-3 || (g[l][c] - fd).abs() < 1e-10,
                        "{m} [{l}][{c}]: {} vs {fd}",
                        g[l][c]
                    );
                }
            }
        }
    }
}

#[test]
fn gradient_special_cases() {
    let mut rng = seed::rng(13);
    let shapes = vec![[3, 2, 2], [4, 1, 1]];
    let a = common::random_stack(&mut rng, &shapes);
    let b = common::random_stack(&mut rng, &shapes);
    for m in ComparisonMethod::ALL {
        let g = distance_grad_w(m, &a, &a, &ScalarWeights::ones(&[3, 4])).unwrap();
        assert!(g.iter().flatten().all(|&v| v == 0.0));
        let g = distance_grad_w(m, &a, &b, &ScalarWeights::filled(&[3, 4], 0.0)).unwrap();
        assert!(g.iter().flatten().all(|&v| v == 0.0));
    }
}

#[test]
fn pooled_sorted_is_descending_permutation() {
    let t = Tensor3::from_vec(4, 1, 2, vec![1.0, 1.0, 5.0, 3.0, -1.0, 0.0, 2.0, 2.0]).unwrap();
    let p = PooledFeatures::new(&t);
    assert_eq!(p.mean, vec![1.0, 4.0, -0.5, 2.0]);
    assert_eq!(p.sorted, vec![4.0, 2.0, 1.0, -0.5]);
}

#[test]
fn sort_distance_ignores_channel_permutations() {
    let mut rng = seed::rng(4);
    for _ in 0..100 {
        let c = rng.gen_range(2..10);
        let a: Vec<f32> = (0..c).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let b: Vec<f32> = (0..c).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let (mut pa, mut pb) = (a.clone(), b.clone());
        pa.shuffle(&mut rng);
        pb.shuffle(&mut rng);
        let w = ScalarWeights::ones(&[c]);
        let d = d_sort(&stack1(c, 1, 1, &a), &stack1(c, 1, 1, &b), &w).unwrap();
        let dp = d_sort(&stack1(c, 1, 1, &pa), &stack1(c, 1, 1, &pb), &w).unwrap();
        assert!((d - dp).abs() <= 1e-6);
    }
}

#[test]
fn weights_file_format() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("w.json");
    let w = ScalarWeights::from_layers(vec![vec![0.5, 1.5], vec![2.0]]).unwrap();
    w.write(&path, ComparisonMethod::SpatialPlusSort, "alexnet").unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["method"], "spatial_plus_sort");
    assert_eq!(v["layers"][0]["index"], 0);
    let f = WeightsFile::read(&path).unwrap();
    assert_eq!(f.weights().unwrap(), w);
    assert_eq!(f.network, "alexnet");
}

fn stacks() -> impl Strategy<Value = (FeatureStack, FeatureStack, ScalarWeights)> {
    (any::<u64>(), 1usize..4).prop_map(|(s, _)| {
        let mut rng = seed::rng(s);
        let shapes = common::random_shapes(&mut rng);
        let a = common::random_stack(&mut rng, &shapes);
        let b = common::random_stack(&mut rng, &shapes);
        let w = random_weights(&mut rng, &a);
        (a, b, w)
    })
}

fn method() -> impl Strategy<Value = ComparisonMethod> {
    prop::sample::select(ComparisonMethod::ALL.to_vec())
}

proptest! {
    #[test]
    fn identity_and_nonnegativity((a, b, w) in stacks(), m in method()) {
        prop_assert!(distance(m, &a, &a, &w).unwrap().abs() <= 1e-6);
        prop_assert!(distance(m, &a, &b, &w).unwrap() >= 0.0);
    }

    #[test]
    fn symmetry((a, b, w) in stacks(), m in method()) {
        prop_assert_eq!(distance(m, &a, &b, &w).unwrap(), distance(m, &b, &a, &w).unwrap());
    }

    #[test]
    fn scaling_is_quadratic((a, b, w) in stacks(), m in method(), k in 0.1f64..5.0) {
        let d = distance(m, &a, &b, &w).unwrap();
        let dk = distance(m, &a, &b, &w.scaled(k)).unwrap();
        prop_assert!((dk - k * k * d).abs() <= 1e-9 * dk.max(1.0));
    }

    #[test]
    fn combined_methods_are_exact_sums((a, b, w) in stacks()) {
        let s = distance(ComparisonMethod::Spatial, &a, &b, &w).unwrap();
        let m = distance(ComparisonMethod::Mean, &a, &b, &w).unwrap();
        let o = distance(ComparisonMethod::Sort, &a, &b, &w).unwrap();
        prop_assert_eq!(distance(ComparisonMethod::SpatialPlusMean, &a, &b, &w).unwrap(), s + m);
        prop_assert_eq!(distance(ComparisonMethod::SpatialPlusSort, &a, &b, &w).unwrap(), s + o);
    }

    #[test]
    fn zero_weights_annihilate((a, b, _w) in stacks(), m in method()) {
        let z = ScalarWeights::filled(&a.channel_counts(), 0.0);
        prop_assert_eq!(distance(m, &a, &b, &z).unwrap(), 0.0);
    }
}
