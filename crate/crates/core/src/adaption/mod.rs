//! Training the per-channel scalars, together with an auxiliary judge
//! network, so a metric agrees with a distortion ordering.

pub mod judge;
pub mod loss;
pub mod optimizer;
mod trainer;

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distortions::{make_triplet_seeded, triplet_seed, DistortionOrdering};
use crate::error::{Error, Result};
use crate::evaluation::ImageSource;
use crate::metric::{FeatureExtractor, MetricSpec};
use crate::seed;
use crate::similarity::{ComparisonMethod, ScalarWeights, WeightsFile};
use crate::tensor_net::WeightContainer;

pub use judge::{JudgeInput, JudgeNet};
pub use loss::{bce, sigmoid, sync_loss, sync_loss_weighted};
pub use optimizer::Adam;
pub use trainer::{learning_rate, Gradients, PreparedTriplet, StepLosses, Trainer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub val_fraction: f64,
    /// Number of final epochs over which the learning rate decays to 0.
    pub decay_epochs: usize,
    pub repeats: usize,
    pub sync_weight: f64,
    pub base_lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 10,
            val_fraction: 0.2,
            decay_epochs: 5,
            repeats: 4,
            sync_weight: loss::DEFAULT_SYNC_WEIGHT,
            base_lr: 1e-4,
            batch_size: 50,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.epochs == 0 {
            return fail("epochs must be at least 1");
        }
        if self.decay_epochs > self.epochs {
            return fail("decay_epochs exceeds epochs");
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return fail("val_fraction must lie in [0, 1)");
        }
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return fail("base_lr must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if !(self.sync_weight >= 0.0 && self.sync_weight.is_finite()) {
            return fail("sync_weight must be nonnegative");
        }
        if self.repeats == 0 {
            return fail("repeats must be at least 1");
        }
        Ok(())
    }

    pub fn lr_at(&self, progress: f64) -> f64 {
        learning_rate(self.base_lr, self.epochs, self.decay_epochs, progress)
    }
}

/// Epoch 0 holds the validation of the untrained (baseline) scalars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr_start: Option<f64>,
    pub lr_end: Option<f64>,
    pub sync_active: bool,
    pub train: Option<StepLosses>,
    pub val: StepLosses,
    pub val_two_afc: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: TrainConfig,
    pub repeat: Option<u32>,
    pub run_seed: u64,
    pub ordering: DistortionOrdering,
    pub metric: MetricSpec,
    pub network_checksum: String,
    pub dataset: String,
    pub train_images: usize,
    pub val_images: usize,
    pub history: Vec<EpochRecord>,
    /// Last epoch trained with the synchronizing loss, once the gate closed.
    pub sync_disabled_after: Option<usize>,
}

impl RunManifest {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn final_val_two_afc(&self) -> Option<f64> {
        self.history.last().map(|r| r.val_two_afc)
    }
}

#[derive(Clone, Debug)]
pub struct AdaptionRun {
    pub weights: ScalarWeights,
    pub judge: JudgeNet,
    pub manifest: RunManifest,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const WEIGHTS_FILE: &str = "weights.json";
pub const JUDGE_FILE: &str = "judge.dpsw";

impl AdaptionRun {
    pub fn history(&self) -> &[EpochRecord] {
        &self.manifest.history
    }

    /// Writes scalars and judge first and the manifest last, so a manifest
    /// on disk implies a complete checkpoint.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.weights.write(
            dir.join(WEIGHTS_FILE),
            self.manifest.metric.method,
            &self.manifest.metric.network,
        )?;
        let mut c = WeightContainer::new();
        self.judge.to_container(&mut c);
        c.set_meta("kind", "judge".into());
        c.write(dir.join(JUDGE_FILE))?;
        self.manifest.write(dir.join(MANIFEST_FILE))
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        Ok(Self {
            weights: WeightsFile::read(dir.join(WEIGHTS_FILE))?.weights()?,
            judge: JudgeNet::from_container(&WeightContainer::read(dir.join(JUDGE_FILE))?)?,
            manifest: RunManifest::read(dir.join(MANIFEST_FILE))?,
        })
    }
}

const STREAM_JUDGE_INIT: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_TRIPLETS: u64 = 3;
const STREAM_BATCHES: u64 = 4;
const STREAM_REPEAT: u64 = 5;

/// Seed of repeat `r` of a run configured with `seed`.
pub fn repeat_seed(seed: u64, repeat: u32) -> u64 {
    seed::derive(seed, &[STREAM_REPEAT, u64::from(repeat)])
}

/// `(train, validation)` image indices: the first `round(fraction * n)`
/// entries of a seeded permutation are held out.
pub fn split_indices(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::derived_rng(seed, &[STREAM_SPLIT]));
    let n_val = (fraction * n as f64).round() as usize;
    let train = idx.split_off(n_val.min(n));
    (train, idx)
}

struct Prep<'a, S: ?Sized> {
    source: &'a S,
    extractor: &'a FeatureExtractor,
    method: ComparisonMethod,
    ordering: &'a DistortionOrdering,
    triplet_base: u64,
}

impl<S: ImageSource + ?Sized> Prep<'_, S> {
    /// Stream 0 is validation; training epoch `e` uses stream `e`.
    fn prepare(&self, indices: &[usize], stream: u64) -> Result<Vec<PreparedTriplet>> {
        indices
            .par_iter()
            .map(|&i| {
                let img = self.source.image(i)?;
                let s = triplet_seed(self.triplet_base, i, stream);
                let t = make_triplet_seeded(&img, self.ordering, s);
                let terms = self.extractor.triplet_terms(self.method, &t)?;
                Ok(PreparedTriplet::new(terms, t.judgement).with_record(t.record(self.source.label(i), s)))
            })
            .collect()
    }
}

/// Trains scalars (initialised to 1) and a judge on triplets drawn from
/// `source` under `ordering`, using `config.seed` as the run seed.
pub fn train_adaption<S: ImageSource + ?Sized>(
    source: &S,
    ordering: &DistortionOrdering,
    extractor: &FeatureExtractor,
    method: ComparisonMethod,
    config: &TrainConfig,
) -> Result<AdaptionRun> {
    config.validate()?;
    if source.is_empty() {
        return Err(Error::Dataset(format!("training set `{}` is empty", source.id())));
    }
    let run_seed = config.seed;
    let (train_idx, val_idx) = split_indices(source.len(), config.val_fraction, run_seed);
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::Dataset(format!(
            "{} images cannot be split into non-empty training and validation sets",
            source.len()
        )));
    }
    let network = extractor.network();
    let checksum = network.checksum();
    let prep = Prep {
        source,
        extractor,
        method,
        ordering,
        triplet_base: seed::derive(run_seed, &[STREAM_TRIPLETS]),
    };
    let val = prep.prepare(&val_idx, 0)?;

    let judge = JudgeNet::random(&mut seed::derived_rng(run_seed, &[STREAM_JUDGE_INIT]));
    let mut trainer =
        Trainer::new(ScalarWeights::ones(&network.tap_channels()), judge).with_sync_weight(config.sync_weight);
    let mut sync_active = true;
    let mut sync_disabled_after = None;
    let mut history = vec![EpochRecord {
        epoch: 0,
        lr_start: None,
        lr_end: None,
        sync_active,
        train: None,
        val: trainer.losses(&val, sync_active)?,
        val_two_afc: trainer.two_afc(&val)?,
    }];

    let batches_per_epoch = train_idx.len().div_ceil(config.batch_size);
    for epoch in 1..=config.epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut seed::derived_rng(run_seed, &[STREAM_BATCHES, epoch as u64]));
        let mut sums = StepLosses::default();
        let mut seen = 0usize;
        let (mut lr_start, mut lr_end) = (None, None);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let progress = (epoch - 1) as f64 + b as f64 / batches_per_epoch as f64;
            let lr = config.lr_at(progress);
            lr_start.get_or_insert(lr);
            lr_end = Some(lr);
            let batch = prep.prepare(chunk, epoch as u64)?;
            let l = trainer.train_step(&batch, lr, sync_active).map_err(|e| match e {
                Error::NonFiniteLoss { loss, triplet, .. } => Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    loss,
                    triplet,
                },
                other => other,
            })?;
            let n = chunk.len() as f64;
            sums.judge += l.judge * n;
            sums.sync += l.sync * n;
            sums.total += l.total * n;
            seen += chunk.len();
        }
        let n = seen as f64;
        let train = StepLosses {
            judge: sums.judge / n,
            sync: sums.sync / n,
            total: sums.total / n,
        };
        let val_two_afc = trainer.two_afc(&val)?;
        history.push(EpochRecord {
            epoch,
            lr_start,
            lr_end,
            sync_active,
            train: Some(train),
            val: trainer.losses(&val, sync_active)?,
            val_two_afc,
        });
        log::info!(
            "epoch {epoch}: train loss {:.4}, val 2AFC {val_two_afc:.4}{}",
            train.total,
            if sync_active { " (sync)" } else { "" }
        );
        if sync_active && val_two_afc > 0.5 {
            sync_active = false;
            sync_disabled_after = Some(epoch);
        }
    }

    let (weights, judge) = trainer.into_parts();
    Ok(AdaptionRun {
        weights,
        judge,
        manifest: RunManifest {
            config: config.clone(),
            repeat: None,
            run_seed,
            ordering: ordering.clone(),
            metric: MetricSpec {
                network: network.name().to_string(),
                method,
                normalize: extractor.normalize(),
            },
            network_checksum: checksum,
            dataset: source.id(),
            train_images: train_idx.len(),
            val_images: val_idx.len(),
            history,
            sync_disabled_after,
        },
    })
}

/// Repeat `repeat` of an adaption: `train_adaption` with the derived seed.
pub fn train_repeat<S: ImageSource + ?Sized>(
    source: &S,
    ordering: &DistortionOrdering,
    extractor: &FeatureExtractor,
    method: ComparisonMethod,
    config: &TrainConfig,
    repeat: u32,
) -> Result<AdaptionRun> {
    let cfg = TrainConfig {
        seed: repeat_seed(config.seed, repeat),
        ..config.clone()
    };
    let mut run = train_adaption(source, ordering, extractor, method, &cfg)?;
    run.manifest.config.seed = config.seed;
    run.manifest.repeat = Some(repeat);
    Ok(run)
}

/// `config.repeats` independent adaptions.
pub fn train_repeats<S: ImageSource + ?Sized>(
    source: &S,
    ordering: &DistortionOrdering,
    extractor: &FeatureExtractor,
    method: ComparisonMethod,
    config: &TrainConfig,
) -> Result<Vec<AdaptionRun>> {
    (0..config.repeats as u32)
        .map(|r| train_repeat(source, ordering, extractor, method, config, r))
        .collect()
}
