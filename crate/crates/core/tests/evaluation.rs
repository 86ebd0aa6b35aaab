use std::fs;
use std::path::Path;
use std::sync::Arc;

use dps_core::distortions::{make_triplet_seeded, triplet_seed, DistortionKind, DistortionOrdering};
use dps_core::evaluation::report::{read_jsonl_file, write_csv, write_jsonl, Aggregate};
use dps_core::evaluation::*;
use dps_core::metric::{DpsMetric, PerceptualMetric};
use dps_core::similarity::ComparisonMethod;
use dps_core::tensor_net::{arch, init};
use dps_core::{seed, synthetic, Error, ImageTensor, LoadedNetwork};
use rand::seq::SliceRandom;
use rand::Rng;

/// Pseudo-random but deterministic distance from the pixel contents.
struct HashMetric;

impl PerceptualMetric for HashMetric {
    fn distance(&self, a: &ImageTensor, b: &ImageTensor) -> dps_core::Result<f64> {
        let bits: Vec<u64> = a
            .grid()
            .as_slice()
            .iter()
            .chain(b.grid().as_slice())
            .map(|v| u64::from(v.to_bits()))
            .collect();
        Ok((seed::derive(0, &bits) >> 11) as f64 / (1u64 << 53) as f64)
    }
}

/// Sum of squared pixel differences.
struct PixelMetric;

impl PerceptualMetric for PixelMetric {
    fn distance(&self, a: &ImageTensor, b: &ImageTensor) -> dps_core::Result<f64> {
        Ok(a.grid()
            .as_slice()
            .iter()
            .zip(b.grid().as_slice())
            .map(|(x, y)| f64::from(x - y).powi(2))
            .sum())
    }
}

fn oracle_two_afc(samples: &[(f64, f64, f64)]) -> f64 {
    let mut total = 0.0;
    for &(d0, d1, j) in samples {
        total += if d1 < d0 { j } else { 1.0 - j };
    }
    total / samples.len() as f64
}

/// Interpolated average precision written as a direct double loop.
fn oracle_jnd(d: &[f64], same: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..d.len()).collect();
    idx.sort_by(|&a, &b| d[a].partial_cmp(&d[b]).unwrap());
    let total: f64 = same.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut prec = Vec::new();
    let mut gain = Vec::new();
    let mut tp = 0.0;
    for (k, &i) in idx.iter().enumerate() {
        tp += same[i];
        prec.push(tp / (k + 1) as f64);
        gain.push(same[i] / total);
    }
    let mut ap = 0.0;
    for k in 0..prec.len() {
        let best = prec[k..].iter().cloned().fold(f64::MIN, f64::max);
        ap += gain[k] * best;
    }
    ap
}

fn toy_metric() -> DpsMetric {
    let spec = arch::toy(4, 6);
    let c = init::random_container(&spec, 3, None);
    DpsMetric::baseline(
        Arc::new(LoadedNetwork::load(&spec, &c).unwrap()),
        ComparisonMethod::Spatial,
        true,
    )
}

#[test]
fn random_metric_scores_half() {
    let o = DistortionOrdering::full(DistortionKind::ALL.to_vec()).unwrap();
    let n = 10_000;
    let source = InMemoryImages::new("rand", synthetic::images(n, 2, 2, 4));
    let r = eval_ordering(&HashMetric, &MetricLabel::baseline("hash", "none"), &source, &o, 1).unwrap();
    let sigma = (0.25 / n as f64).sqrt();
    assert_eq!(r.samples, n);
    assert!((r.value - 0.5).abs() <= 3.0 * sigma, "{}", r.value);
}

#[test]
fn two_afc_matches_brute_force() {
    let mut rng = seed::rng(2);
    for _ in 0..1000 {
        let n = rng.gen_range(1..40);
        let samples: Vec<(f64, f64, f64)> = (0..n)
            .map(|_| {
                let d0 = f64::from(rng.gen_range(0..5u8));
                let d1 = f64::from(rng.gen_range(0..5u8));
                let j = if rng.gen_bool(0.5) {
                    rng.gen_range(0.0..=1.0)
                } else {
                    f64::from(rng.gen_range(0..2u8))
                };
                (d0, d1, j)
            })
            .collect();
        let got = two_afc_from_distances(&samples).unwrap();
        assert!((got - oracle_two_afc(&samples)).abs() <= 1e-12);
        assert!((0.0..=1.0).contains(&got));
    }
}

#[test]
fn reversed_ordering_scores_the_complement() {
    let o = DistortionOrdering::full(DistortionKind::ALL.to_vec()).unwrap();
    let source = InMemoryImages::new("c", synthetic::images(1000, 3, 3, 5));
    let label = MetricLabel::baseline("hash", "none");
    let a = eval_ordering(&HashMetric, &label, &source, &o, 8).unwrap().value;
    let b = eval_ordering(&HashMetric, &label, &source, &o.reversed(), 8)
        .unwrap()
        .value;
    assert!((a + b - 1.0).abs() <= 1e-12, "{a} + {b}");
}

#[test]
fn ordering_distances_parallel_equals_serial() {
    let metric = toy_metric();
    let imgs = synthetic::images(24, 16, 16, 6);
    let source = InMemoryImages::new("p", imgs.clone());
    let o = DistortionOrdering::full(DistortionKind::ALL.to_vec()).unwrap();
    let par = ordering_distances(&metric, &source, &o, 3).unwrap();
    for (i, img) in imgs.iter().enumerate() {
        let t = make_triplet_seeded(img, &o, triplet_seed(3, i, 0));
        let (d0, d1) = metric.distances(&t.reference, &t.x0, &t.x1).unwrap();
        assert!((par[i].0 - d0).abs() <= 1e-9 && (par[i].1 - d1).abs() <= 1e-9);
        assert_eq!(par[i].2, t.judgement);
    }
}

#[test]
fn jnd_matches_oracle() {
    let mut rng = seed::rng(7);
    for _ in 0..300 {
        let n = rng.gen_range(1..30);
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let s: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    f64::from(rng.gen_range(0..2u8))
                } else {
                    rng.gen_range(0.0..=1.0)
                }
            })
            .collect();
        let got = jnd_map(&d, &s).unwrap();
        assert!((got - oracle_jnd(&d, &s)).abs() <= 1e-12, "{got}");
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

#[test]
fn jnd_extremes_over_all_rankings() {
    let same = [0.9, 0.1, 0.6, 0.0, 1.0, 0.35];
    let mut best = f64::MIN;
    let mut worst = f64::MAX;
    for p in permutations(same.len()) {
        let d: Vec<f64> = p.iter().map(|&r| r as f64).collect();
        let v = jnd_map(&d, &same).unwrap();
        best = best.max(v);
        worst = worst.min(v);
    }
    // ideal: most "same" first
    let ideal: Vec<f64> = same.iter().map(|s| 1.0 - s).collect();
    let reverse: Vec<f64> = same.to_vec();
    assert_eq!(jnd_map(&ideal, &same).unwrap(), best);
    assert_eq!(jnd_map(&reverse, &same).unwrap(), worst);
    assert!(best > worst);
}

#[test]
fn jnd_invariances() {
    let mut rng = seed::rng(8);
    let d: Vec<f64> = (0..50).map(|_| rng.gen_range(0.01..3.0)).collect();
    let s: Vec<f64> = (0..50).map(|_| rng.gen_range(0.0..=1.0)).collect();
    let base = jnd_map(&d, &s).unwrap();
    for f in [|x: f64| x.ln(), |x: f64| 3.0 * x + 7.0, |x: f64| x.powi(3)] {
        let t: Vec<f64> = d.iter().map(|&x| f(x)).collect();
        assert_eq!(jnd_map(&t, &s).unwrap(), base);
    }
    let mut order = d.clone();
    order.shuffle(&mut rng);
    for c in [0.25, 1.0] {
        assert!((jnd_map(&order, &vec![c; 50]).unwrap() - c).abs() <= 1e-12);
    }
    assert_eq!(jnd_map(&d, &vec![0.0; 50]).unwrap(), 0.0);
    assert!(matches!(jnd_map(&[], &[]), Err(Error::EmptySamples)));
    assert!(jnd_map(&[1.0], &[0.5, 0.5]).is_err());
}

#[test]
fn image_dir_reads_pngs() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("faces");
    let imgs = vec![
        synthetic::image(32, 32, 1),
        synthetic::image(96, 96, 2),
        synthetic::image(32, 32, 3),
    ];
    ImageDir::create(&root, &imgs).unwrap();
    let d = load_image_dir(&root).unwrap();
    assert_eq!(d.len(), 3);
    assert_eq!(d.id(), "faces");
    assert_eq!(d.label(1), "00001.png");
    for (got, want) in d.iter().zip(&imgs) {
        let got = got.unwrap();
        assert_eq!((got.height(), got.width()), (want.height(), want.width()));
        // 8-bit quantisation
        for (a, b) in got.grid().as_slice().iter().zip(want.grid().as_slice()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }
}

#[test]
fn image_dir_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(ImageDir::open(dir.path()), Err(Error::Dataset(_))));
    fs::write(dir.path().join("bad.png"), b"not a png").unwrap();
    fs::write(dir.path().join(INDEX_FILE), "bad.png\nmissing.png\n").unwrap();
    let d = ImageDir::open(dir.path()).unwrap();
    assert_eq!(d.len(), 2);
    assert!(matches!(d.image(0), Err(Error::Decode { .. })));
    assert!(d.image(1).is_err());
    assert!(d.image(2).is_err());
}

fn write_label(path: &Path, v: f32) {
    fs::write(path, v.to_le_bytes()).unwrap();
}

/// `count` 2AFC records in `<root>/2afc/val/<category>`.
fn two_afc_category(root: &Path, category: &str, count: usize, seed: u64) -> Vec<TwoAfcSample> {
    let base = root.join("2afc").join(BAPPS_EVAL_SPLIT).join(category);
    for sub in ["ref", "p0", "p1", "judge"] {
        fs::create_dir_all(base.join(sub)).unwrap();
    }
    let mut rng = seed::rng(seed);
    (0..count)
        .map(|i| {
            let id = format!("{i:06}");
            let s = TwoAfcSample {
                reference: synthetic::image(8, 8, seed * 100 + i as u64),
                x0: synthetic::image(8, 8, seed * 100 + i as u64 + 1000),
                x1: synthetic::image(8, 8, seed * 100 + i as u64 + 2000),
                judgement: f64::from(rng.gen_range(0u8..=4)) / 4.0,
            };
            write_png(&base.join("ref").join(format!("{id}.png")), &s.reference).unwrap();
            write_png(&base.join("p0").join(format!("{id}.png")), &s.x0).unwrap();
            write_png(&base.join("p1").join(format!("{id}.png")), &s.x1).unwrap();
            write_label(&base.join("judge").join(&id), s.judgement as f32);
            s
        })
        .collect()
}

#[test]
fn bapps_two_afc_records() {
    let dir = tempfile::tempdir().unwrap();
    let a = two_afc_category(dir.path(), "cnn", 3, 1);
    let b = two_afc_category(dir.path(), "traditional", 2, 2);
    fs::create_dir_all(dir.path().join("2afc/val/empty")).unwrap();
    let idx = load_bapps(dir.path(), BappsPart::TwoAfc).unwrap();
    assert_eq!(idx.len(), 5);
    let loaded: Vec<TwoAfcSample> = idx.iter_two_afc().map(|s| s.unwrap()).collect();
    for (got, want) in loaded.iter().zip(a.iter().chain(&b)) {
        assert_eq!(got.judgement, want.judgement);
        assert_eq!(got.reference.height(), 8);
    }
    assert!(idx.jnd(0).is_err());

    let label = MetricLabel::baseline("pixel", "l2");
    let r = eval_bapps_two_afc(&PixelMetric, &label, &idx, "bapps_2afc").unwrap();
    let triples: Vec<(f64, f64, f64)> = loaded
        .iter()
        .map(|s| {
            let (d0, d1) = PixelMetric.distances(&s.reference, &s.x0, &s.x1).unwrap();
            (d0, d1, s.judgement)
        })
        .collect();
    assert_eq!(r.samples, 5);
    assert!((r.value - oracle_two_afc(&triples)).abs() <= 1e-12);
    assert_eq!(r.score_kind, ScoreKind::TwoAfc);
    assert!(eval_bapps_jnd(&PixelMetric, &label, &idx, "x").is_err());
}

#[test]
fn bapps_jnd_records() {
    let dir = tempfile::tempdir().unwrap();
    let base = dir.path().join("jnd/val/cnn");
    for sub in ["p0", "p1", "same"] {
        fs::create_dir_all(base.join(sub)).unwrap();
    }
    let same = [0.0f32, 0.5, 1.0, 0.25];
    for (i, s) in same.iter().enumerate() {
        let id = format!("{i:06}");
        write_png(
            &base.join("p0").join(format!("{id}.png")),
            &synthetic::image(8, 8, i as u64),
        )
        .unwrap();
        write_png(
            &base.join("p1").join(format!("{id}.png")),
            &synthetic::image(8, 8, 50 + i as u64),
        )
        .unwrap();
        write_label(&base.join("same").join(&id), *s);
    }
    let idx = load_bapps(dir.path(), BappsPart::Jnd).unwrap();
    assert_eq!(idx.len(), 4);
    let samples: Vec<JndSample> = idx.iter_jnd().map(|s| s.unwrap()).collect();
    assert_eq!(samples.iter().map(|s| s.same_fraction as f32).collect::<Vec<_>>(), same);
    let r = eval_bapps_jnd(&PixelMetric, &MetricLabel::baseline("pixel", "l2"), &idx, "bapps_jnd").unwrap();
    let d: Vec<f64> = samples
        .iter()
        .map(|s| PixelMetric.distance(&s.p0, &s.p1).unwrap())
        .collect();
    let s: Vec<f64> = samples.iter().map(|s| s.same_fraction).collect();
    assert!((r.value - oracle_jnd(&d, &s)).abs() <= 1e-12);
    assert_eq!(r.score_kind, ScoreKind::JndMap);
}

#[test]
fn bapps_layout_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(matches!(
        load_bapps(dir.path(), BappsPart::TwoAfc),
        Err(Error::Dataset(_))
    ));

    two_afc_category(dir.path(), "cnn", 2, 1);
    let cat = dir.path().join("2afc/val/cnn");
    fs::remove_file(cat.join("p1/000001.png")).unwrap();
    assert!(matches!(
        load_bapps(dir.path(), BappsPart::TwoAfc),
        Err(Error::Dataset(_))
    ));

    fs::remove_dir_all(cat.join("p1")).unwrap();
    assert!(matches!(
        load_bapps(dir.path(), BappsPart::TwoAfc),
        Err(Error::Dataset(_))
    ));

    let dir = tempfile::tempdir().unwrap();
    two_afc_category(dir.path(), "cnn", 2, 1);
    let cat = dir.path().join("2afc/val/cnn");
    fs::write(cat.join("judge/000001"), [0u8; 8]).unwrap();
    assert!(load_bapps(dir.path(), BappsPart::TwoAfc).is_err());
    write_label(&cat.join("judge/000001"), 1.5);
    assert!(load_bapps(dir.path(), BappsPart::TwoAfc).is_err());
    write_label(&cat.join("judge/000001"), 0.5);
    fs::remove_file(cat.join("judge/000000")).unwrap();
    assert!(load_bapps(dir.path(), BappsPart::TwoAfc).is_err());

    // only the evaluation split is read by default
    let dir = tempfile::tempdir().unwrap();
    two_afc_category(dir.path(), "cnn", 1, 1);
    fs::rename(dir.path().join("2afc/val"), dir.path().join("2afc/train")).unwrap();
    assert!(load_bapps(dir.path(), BappsPart::TwoAfc).is_err());
    assert_eq!(
        load_bapps_split(dir.path(), BappsPart::TwoAfc, "train").unwrap().len(),
        1
    );
}

#[test]
fn reports_round_trip_through_files() {
    let o = DistortionOrdering::new(vec![DistortionKind::ShiftHue, DistortionKind::Rotate]).unwrap();
    let source = InMemoryImages::new("svhn", synthetic::images(20, 8, 8, 1));
    let mut reports =
        vec![eval_ordering(&HashMetric, &MetricLabel::baseline("toy", "spatial"), &source, &o, 2).unwrap()];
    for r in 0..3 {
        reports.push(
            eval_ordering(
                &HashMetric,
                &MetricLabel::adapted("toy", "spatial", r),
                &source,
                &o,
                2 + u64::from(r),
            )
            .unwrap(),
        );
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("reports.jsonl");
    write_jsonl(fs::File::create(&path).unwrap(), &reports).unwrap();
    assert_eq!(read_jsonl_file(&path).unwrap(), reports);

    let mut csv = Vec::new();
    write_csv(&mut csv, &reports).unwrap();
    let text = String::from_utf8(csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), report::CSV_COLUMNS.join(","));
    assert_eq!(lines.count(), 4);
    assert!(text.contains("shift_hue<rotate"));

    let agg = Aggregate::new(&reports).unwrap();
    let summary = agg.summary();
    assert_eq!(summary.rows.len(), 2);
    let n = summary.column("svhn_2afc_n").unwrap();
    let adapted = summary.rows.iter().find(|r| r[2] == "adapted").unwrap();
    assert_eq!(adapted[n], "3");
    let deltas = agg.deltas();
    assert_eq!(deltas.rows.len(), 1);
    let mean_adapted: f64 = reports[1..].iter().map(|r| r.value).sum::<f64>() / 3.0;
    let delta: f64 = deltas.rows[0][deltas.column("delta").unwrap()].parse().unwrap();
    assert!((delta - (mean_adapted - reports[0].value)).abs() <= 1e-6);
}
