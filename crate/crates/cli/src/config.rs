//! Experiment configuration: a JSON document plus `--set key=value`
//! overrides applied to the parsed tree before deserialization.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use dps_core::adaption::TrainConfig;
use dps_core::distortions::DistortionOrdering;
use dps_core::evaluation::{ImageDir, ImageSource, InMemoryImages};
use dps_core::similarity::ComparisonMethod;
use dps_core::tensor_net::arch;
use dps_core::{seed, synthetic, ImageTensor, LoadedNetwork, NetworkSpec, WeightContainer};

const STREAM_ORDERINGS: u64 = 1;
const STREAM_TRAIN: u64 = 2;
const STREAM_EVAL: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkEntry {
    pub name: String,
    /// Layer list; the built-in architecture of the same name when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<PathBuf>,
    pub weights: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixture: Option<PathBuf>,
}

impl NetworkEntry {
    fn builtin(name: &str) -> Self {
        Self {
            name: name.into(),
            spec: None,
            weights: PathBuf::from(format!("weights/{name}.dpsw")),
            fixture: Some(PathBuf::from(format!("weights/{name}.fixture.dpsw"))),
        }
    }

    pub fn network_spec(&self) -> Result<NetworkSpec> {
        match &self.spec {
            Some(p) => NetworkSpec::read(p).with_context(|| format!("network `{}`", self.name)),
            None => arch::by_name(&self.name).with_context(|| {
                format!(
                    "network `{}` has no spec file and is not a built-in architecture",
                    self.name
                )
            }),
        }
    }

    pub fn load(&self) -> Result<Arc<LoadedNetwork>> {
        let spec = self.network_spec()?;
        let container = WeightContainer::read(&self.weights)
            .with_context(|| format!("network `{}`: reading {}", self.name, self.weights.display()))?;
        let net = LoadedNetwork::load(&spec, &container).with_context(|| format!("network `{}`", self.name))?;
        Ok(Arc::new(net))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticImages {
    pub count: usize,
    pub height: usize,
    pub width: usize,
    #[serde(default)]
    pub seed: u64,
}

/// A named image collection: a PNG directory with an index file, or
/// generated images for smoke runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticImages>,
}

impl DatasetEntry {
    fn dir(name: &str, path: &str) -> Self {
        Self {
            name: name.into(),
            path: Some(path.into()),
            synthetic: None,
        }
    }

    pub fn open(&self) -> Result<NamedSource> {
        let inner: Box<dyn ImageSource> = match (&self.path, &self.synthetic) {
            (Some(p), None) => Box::new(ImageDir::open(p).with_context(|| format!("dataset `{}`", self.name))?),
            (None, Some(s)) => Box::new(InMemoryImages::new(
                self.name.clone(),
                synthetic::images(s.count, s.height, s.width, s.seed),
            )),
            _ => bail!("dataset `{}` needs exactly one of `path` or `synthetic`", self.name),
        };
        Ok(NamedSource {
            name: self.name.clone(),
            inner,
        })
    }
}

/// An image source reported under its configured name.
pub struct NamedSource {
    name: String,
    inner: Box<dyn ImageSource>,
}

impl ImageSource for NamedSource {
    fn len(&self) -> usize {
        self.inner.len()
    }

    fn image(&self, index: usize) -> dps_core::Result<ImageTensor> {
        self.inner.image(index)
    }

    fn label(&self, index: usize) -> String {
        self.inner.label(index)
    }

    fn id(&self) -> String {
        self.name.clone()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Orderings {
    Count(usize),
    List(Vec<DistortionOrdering>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub networks: Vec<NetworkEntry>,
    pub methods: Vec<ComparisonMethod>,
    pub orderings: Orderings,
    pub repeats: usize,
    pub seed: u64,
    pub normalize: bool,
    pub train_data: DatasetEntry,
    pub eval_data: Vec<DatasetEntry>,
    pub bapps: Option<PathBuf>,
    /// `train.seed` and `train.repeats` are replaced by the sweep.
    pub train: TrainConfig,
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            networks: ["alexnet", "squeezenet1_1", "vgg16"]
                .map(NetworkEntry::builtin)
                .to_vec(),
            methods: ComparisonMethod::ALL.to_vec(),
            orderings: Orderings::Count(20),
            repeats: 4,
            seed: 0,
            normalize: true,
            train_data: DatasetEntry::dir("svhn_train", "data/svhn_train"),
            eval_data: vec![
                DatasetEntry::dir("svhn", "data/svhn_test"),
                DatasetEntry::dir("stl10", "data/stl10_test"),
            ],
            bapps: Some(PathBuf::from("data/bapps")),
            train: TrainConfig::default(),
            output: PathBuf::from("runs"),
        }
    }
}

impl ExperimentConfig {
    /// Reads `path` (or starts from the defaults) and applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut tree = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Value::Object(Map::new()),
        };
        for o in overrides {
            apply_override(&mut tree, o)?;
        }
        let cfg: Self = serde_json::from_value(tree).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.networks.is_empty() {
            bail!("no networks configured");
        }
        if self.methods.is_empty() {
            bail!("no comparison methods configured");
        }
        if self.repeats == 0 {
            bail!("repeats must be at least 1");
        }
        let mut names: Vec<_> = self.networks.iter().map(|n| &n.name).collect();
        names.sort();
        names.dedup();
        if names.len() != self.networks.len() {
            bail!("network names must be unique");
        }
        if let Orderings::List(l) = &self.orderings {
            if l.is_empty() {
                bail!("ordering list is empty");
            }
        }
        self.train_config(0).validate()?;
        Ok(())
    }

    pub fn orderings(&self) -> Result<Vec<DistortionOrdering>> {
        Ok(match &self.orderings {
            Orderings::Count(n) => DistortionOrdering::random_distinct(*n, self.ordering_seed())?,
            Orderings::List(l) => l.clone(),
        })
    }

    pub fn ordering_seed(&self) -> u64 {
        seed::derive(self.seed, &[STREAM_ORDERINGS])
    }

    /// Training config of every repeat under ordering `ordering`.
    pub fn train_config(&self, ordering: usize) -> TrainConfig {
        TrainConfig {
            seed: seed::derive(self.seed, &[STREAM_TRAIN, ordering as u64]),
            repeats: self.repeats,
            ..self.train.clone()
        }
    }

    /// Seed of the held-out triplets scored under ordering `ordering`.
    pub fn eval_seed(&self, ordering: usize) -> u64 {
        seed::derive(self.seed, &[STREAM_EVAL, ordering as u64])
    }

    pub fn orderings_dir(&self) -> PathBuf {
        self.output.join("orderings")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.output.join("reports")
    }

    pub fn summary_dir(&self) -> PathBuf {
        self.output.join("summary")
    }

    pub fn cell_dir(&self, network: &str, method: ComparisonMethod, ordering: usize, repeat: u32) -> PathBuf {
        self.output
            .join("cells")
            .join(network)
            .join(method.name())
            .join(ordering_name(ordering))
            .join(format!("repeat_{repeat}"))
    }

    /// Records the resolved config next to the artifacts it produced.
    pub fn write_resolved(&self, file: &str) -> Result<()> {
        std::fs::create_dir_all(&self.output).with_context(|| format!("creating {}", self.output.display()))?;
        let path = self.output.join(file);
        std::fs::write(&path, serde_json::to_string_pretty(self)? + "\n")
            .with_context(|| format!("writing {}", path.display()))
    }
}

pub fn ordering_name(index: usize) -> String {
    format!("ordering_{index:02}")
}

/// Sets the dotted `key` of `tree` to `value`, parsed as JSON when it parses
/// and taken as a string otherwise. Missing objects are created.
pub fn apply_override(tree: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .with_context(|| format!("override `{assignment}` is not key=value"))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("override key `{key}` has an empty component");
    }
    let mut node = tree;
    for (i, part) in parts.iter().enumerate() {
        if node.is_null() {
            *node = Value::Object(Map::new());
        }
        let obj = node
            .as_object_mut()
            .with_context(|| format!("override `{key}`: `{}` is not an object", parts[..i].join(".")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    unreachable!("split yields at least one component")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_describe_the_full_sweep() {
        let c = ExperimentConfig::default();
        let cells = c.networks.len() * c.methods.len() * 20 * c.repeats;
        assert_eq!(cells, 1200);
        assert_eq!(c.orderings().unwrap().len(), 20);
        c.validate().unwrap();
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let mut tree = serde_json::json!({"train": {"epochs": 3}});
        apply_override(&mut tree, "train.base_lr=0.5").unwrap();
        apply_override(&mut tree, "output=out/dir").unwrap();
        apply_override(&mut tree, r#"methods=["mean"]"#).unwrap();
        apply_override(&mut tree, "bapps=null").unwrap();
        let c: ExperimentConfig = serde_json::from_value(tree).unwrap();
        assert_eq!((c.train.epochs, c.train.base_lr), (3, 0.5));
        assert_eq!(c.output, PathBuf::from("out/dir"));
        assert_eq!(c.methods, vec![ComparisonMethod::Mean]);
        assert_eq!(c.bapps, None);
    }

    #[test]
    fn bad_overrides_are_rejected() {
        let mut tree = serde_json::json!({"seed": 3});
        assert!(apply_override(&mut tree, "seed").is_err());
        assert!(apply_override(&mut tree, "seed.x=1").is_err());
        assert!(apply_override(&mut tree, "a..b=1").is_err());
        apply_override(&mut tree, "bogus=1").unwrap();
        assert!(serde_json::from_value::<ExperimentConfig>(tree).is_err());
    }

    #[test]
    fn explicit_orderings_parse() {
        let c: ExperimentConfig =
            serde_json::from_str(r#"{"orderings": [["shift_hue", "gaussian_blur", "lower_brightness"]]}"#).unwrap();
        assert_eq!(
            c.orderings().unwrap()[0].to_string(),
            "shift_hue<gaussian_blur<lower_brightness"
        );
    }

    #[test]
    fn cell_seeds_separate_orderings_and_phases() {
        let c = ExperimentConfig::default();
        assert_ne!(c.train_config(0).seed, c.train_config(1).seed);
        assert_ne!(c.train_config(0).seed, c.eval_seed(0));
        assert_eq!(c.train_config(3).repeats, c.repeats);
    }
}
