use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};

use super::Outcome;
use crate::config::{ExperimentConfig, NetworkEntry};
use dps_core::{ImageTensor, Tensor3, WeightContainer};

pub const DEFAULT_TOLERANCE: f64 = 1e-4;
pub const INPUT_TENSOR: &str = "input";
pub const TOLERANCE_META: &str = "tolerance";

pub fn tap_tensor(k: usize) -> String {
    format!("tap.{k}")
}

pub fn run(
    cfg: &ExperimentConfig,
    fixture: Option<PathBuf>,
    weights: Option<PathBuf>,
    spec: Option<PathBuf>,
    arch: Option<String>,
    tolerance: Option<f64>,
) -> Result<Outcome> {
    let checks: Vec<(NetworkEntry, PathBuf)> = match (fixture, weights) {
        (Some(fixture), Some(weights)) => {
            let name = arch
                .or_else(|| {
                    spec.as_ref()
                        .and_then(|s| s.file_stem().map(|n| n.to_string_lossy().into_owned()))
                })
                .context("--arch or --spec is required with --fixture")?;
            vec![(
                NetworkEntry {
                    name,
                    spec,
                    weights,
                    fixture: None,
                },
                fixture,
            )]
        }
        _ => cfg
            .networks
            .iter()
            .filter_map(|n| n.fixture.clone().map(|f| (n.clone(), f)))
            .collect(),
    };
    if checks.is_empty() {
        bail!("no fixtures to verify: pass --fixture and --weights or configure `fixture` on a network");
    }
    let mut failed = 0;
    for (entry, fixture) in &checks {
        match verify(entry, fixture, tolerance) {
            Ok(v) if v.max_err <= v.tolerance => println!(
                "ok {}: {} taps, {} values, max abs err {:.3e} (tolerance {:.0e})",
                entry.name, v.taps, v.values, v.max_err, v.tolerance
            ),
            Ok(v) => {
                failed += 1;
                println!(
                    "MISMATCH {}: max abs err {:.3e} at tap {} exceeds tolerance {:.0e}",
                    entry.name, v.max_err, v.worst_tap, v.tolerance
                );
            }
            Err(e) => {
                failed += 1;
                println!("MISMATCH {}: {e:#}", entry.name);
            }
        }
    }
    Ok(Outcome::from_failures(failed))
}

struct Verdict {
    taps: usize,
    values: usize,
    max_err: f64,
    worst_tap: usize,
    tolerance: f64,
}

fn verify(entry: &NetworkEntry, fixture: &Path, tolerance: Option<f64>) -> Result<Verdict> {
    let net = entry.load()?;
    let fx = WeightContainer::read(fixture).with_context(|| format!("reading fixture {}", fixture.display()))?;
    let tolerance = tolerance
        .or_else(|| fx.meta().get(TOLERANCE_META).and_then(|v| v.as_f64()))
        .unwrap_or(DEFAULT_TOLERANCE);
    let input = fx.get(INPUT_TENSOR).context("fixture has no `input` tensor")?;
    let [c, h, w] = input.shape[..] else {
        bail!("fixture input has shape {:?}, expected [3, H, W]", input.shape);
    };
    let data = input.to_f32().context("fixture input must be f32")?;
    let img = ImageTensor::new(Tensor3::from_vec(c, h, w, data)?)?;
    let feats = net.forward_extract(&img)?;
    let mut v = Verdict {
        taps: feats.len(),
        values: 0,
        max_err: 0.0,
        worst_tap: 0,
        tolerance,
    };
    for (k, got) in feats.layers().iter().enumerate() {
        let name = tap_tensor(k);
        let want = fx
            .get(&name)
            .with_context(|| format!("fixture has no `{name}` tensor"))?;
        ensure!(
            want.shape == got.shape(),
            "`{name}` has shape {:?}, network produced {:?}",
            want.shape,
            got.shape()
        );
        let want = want.to_f64().context("unsupported fixture dtype")?;
        for (a, b) in got.as_slice().iter().zip(&want) {
            let err = (f64::from(*a) - b).abs();
            if !(err <= v.max_err) {
                v.max_err = err;
                v.worst_tap = k;
            }
        }
        v.values += want.len();
    }
    ensure!(
        fx.get(&tap_tensor(feats.len())).is_none(),
        "fixture has more taps than the network's {}",
        feats.len()
    );
    Ok(v)
}
