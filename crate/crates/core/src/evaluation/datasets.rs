//! Dataset ingestion: PNG image directories with an index file, and the
//! BAPPS patch layout.

use std::fs;
use std::path::{Path, PathBuf};

use super::jnd::JndSample;
use super::two_afc::TwoAfcSample;
use crate::error::{Error, Result};
use crate::tensor_net::ImageTensor;

/// Random-access image collection.
pub trait ImageSource: Sync {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn image(&self, index: usize) -> Result<ImageTensor>;

    /// Human-readable name of one entry, used in triplet manifests.
    fn label(&self, index: usize) -> String {
        index.to_string()
    }

    fn id(&self) -> String {
        "images".to_string()
    }
}

/// Images held in memory.
#[derive(Clone, Debug)]
pub struct InMemoryImages {
    id: String,
    images: Vec<ImageTensor>,
}

impl InMemoryImages {
    pub fn new(id: impl Into<String>, images: Vec<ImageTensor>) -> Self {
        Self { id: id.into(), images }
    }

    pub fn images(&self) -> &[ImageTensor] {
        &self.images
    }
}

impl ImageSource for InMemoryImages {
    fn len(&self) -> usize {
        self.images.len()
    }

    fn image(&self, index: usize) -> Result<ImageTensor> {
        self.images
            .get(index)
            .cloned()
            .ok_or_else(|| Error::Dataset(format!("index {index} out of range")))
    }

    fn id(&self) -> String {
        self.id.clone()
    }
}

pub fn read_png(path: &Path) -> Result<ImageTensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let img = image::load_from_memory_with_format(&bytes, image::ImageFormat::Png).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = img.to_rgb8();
    ImageTensor::from_rgb8(rgb.height() as usize, rgb.width() as usize, rgb.as_raw())
}

pub fn write_png(path: &Path, img: &ImageTensor) -> Result<()> {
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, img.to_rgb8())
        .expect("buffer matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Decode {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
}

pub const INDEX_FILE: &str = "index.txt";

/// Directory of PNG files listed (relative paths, one per line) in
/// `index.txt`. Images are decoded on access.
#[derive(Clone, Debug)]
pub struct ImageDir {
    root: PathBuf,
    entries: Vec<String>,
}

impl ImageDir {
    pub fn open(root: impl AsRef<Path>) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        let index = root.join(INDEX_FILE);
        let text = fs::read_to_string(&index)
            .map_err(|e| Error::Dataset(format!("cannot read index {}: {e}", index.display())))?;
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        Ok(Self { root, entries })
    }

    /// Writes `images` as `00000.png, 00001.png, ...` plus the index file.
    pub fn create(root: impl AsRef<Path>, images: &[ImageTensor]) -> Result<Self> {
        let root = root.as_ref();
        fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        let mut entries = Vec::with_capacity(images.len());
        for (i, img) in images.iter().enumerate() {
            let name = format!("{i:05}.png");
            write_png(&root.join(&name), img)?;
            entries.push(name);
        }
        let index = root.join(INDEX_FILE);
        fs::write(&index, entries.join("\n") + "\n").map_err(|e| Error::io(&index, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            entries,
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<ImageTensor>> + '_ {
        (0..self.entries.len()).map(|i| self.image(i))
    }
}

impl ImageSource for ImageDir {
    fn len(&self) -> usize {
        self.entries.len()
    }

    fn image(&self, index: usize) -> Result<ImageTensor> {
        let rel = self
            .entries
            .get(index)
            .ok_or_else(|| Error::Dataset(format!("index {index} out of range")))?;
        read_png(&self.root.join(rel))
    }

    fn label(&self, index: usize) -> String {
        self.entries.get(index).cloned().unwrap_or_default()
    }

    fn id(&self) -> String {
        self.root
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.root.display().to_string())
    }
}

pub fn load_image_dir(path: impl AsRef<Path>) -> Result<ImageDir> {
    ImageDir::open(path)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BappsPart {
    TwoAfc,
    Jnd,
}

impl BappsPart {
    pub fn dir_name(self) -> &'static str {
        match self {
            BappsPart::TwoAfc => "2afc",
            BappsPart::Jnd => "jnd",
        }
    }

    fn image_dirs(self) -> &'static [&'static str] {
        match self {
            BappsPart::TwoAfc => &["ref", "p0", "p1"],
            BappsPart::Jnd => &["p0", "p1"],
        }
    }

    fn label_dir(self) -> &'static str {
        match self {
            BappsPart::TwoAfc => "judge",
            BappsPart::Jnd => "same",
        }
    }
}

/// The evaluation split; the training split is never used.
pub const BAPPS_EVAL_SPLIT: &str = "val";

#[derive(Clone, Debug, PartialEq)]
struct BappsRecord {
    category_dir: PathBuf,
    id: String,
    label: f64,
}

/// Index of BAPPS records; patches are decoded on access.
#[derive(Clone, Debug)]
pub struct BappsIndex {
    part: BappsPart,
    records: Vec<BappsRecord>,
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .map(|e| e.map(|e| e.path()).map_err(|e| Error::io(dir, e)))
        .collect::<Result<_>>()?;
    out.sort();
    Ok(out)
}

fn read_label(path: &Path) -> Result<f64> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let arr: [u8; 4] = bytes
        .as_slice()
        .try_into()
        .map_err(|_| Error::Dataset(format!("{} is not a single 32-bit float", path.display())))?;
    let v = f64::from(f32::from_le_bytes(arr));
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Dataset(format!(
            "{}: judgement {v} outside [0, 1]",
            path.display()
        )));
    }
    Ok(v)
}

fn png_stems(dir: &Path) -> Result<Vec<String>> {
    Ok(sorted_entries(dir)?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .filter_map(|p| p.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .collect())
}

fn index_category(part: BappsPart, dir: &Path) -> Result<Vec<BappsRecord>> {
    if sorted_entries(dir)?.is_empty() {
        return Ok(Vec::new());
    }
    let mut ids: Option<Vec<String>> = None;
    for sub in part.image_dirs() {
        let d = dir.join(sub);
        if !d.is_dir() {
            return Err(Error::Dataset(format!("missing subdirectory {}", d.display())));
        }
        let stems = png_stems(&d)?;
        match &ids {
            None => ids = Some(stems),
            Some(expected) if *expected != stems => {
                return Err(Error::Dataset(format!(
                    "{}: {} patches do not match the {} in {}",
                    d.display(),
                    stems.len(),
                    expected.len(),
                    part.image_dirs()[0]
                )))
            }
            Some(_) => {}
        }
    }
    let ids = ids.unwrap_or_default();
    let label_dir = dir.join(part.label_dir());
    if !label_dir.is_dir() {
        return Err(Error::Dataset(format!("missing subdirectory {}", label_dir.display())));
    }
    let label_count = sorted_entries(&label_dir)?.len();
    if label_count != ids.len() {
        return Err(Error::Dataset(format!(
            "{}: {label_count} judgement files for {} patches",
            label_dir.display(),
            ids.len()
        )));
    }
    ids.into_iter()
        .map(|id| {
            let label_path = label_dir.join(&id);
            if !label_path.is_file() {
                return Err(Error::Dataset(format!("missing judgement {}", label_path.display())));
            }
            Ok(BappsRecord {
                category_dir: dir.to_path_buf(),
                label: read_label(&label_path)?,
                id,
            })
        })
        .collect()
}

impl BappsIndex {
    pub fn part(&self) -> BappsPart {
        self.part
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn patch(&self, i: usize, sub: &str) -> Result<ImageTensor> {
        let r = &self.records[i];
        read_png(&r.category_dir.join(sub).join(format!("{}.png", r.id)))
    }

    pub fn two_afc(&self, i: usize) -> Result<TwoAfcSample> {
        if self.part != BappsPart::TwoAfc {
            return Err(Error::Dataset("not a 2AFC index".into()));
        }
        Ok(TwoAfcSample {
            reference: self.patch(i, "ref")?,
            x0: self.patch(i, "p0")?,
            x1: self.patch(i, "p1")?,
            judgement: self.records[i].label,
        })
    }

    pub fn jnd(&self, i: usize) -> Result<JndSample> {
        if self.part != BappsPart::Jnd {
            return Err(Error::Dataset("not a JND index".into()));
        }
        Ok(JndSample {
            p0: self.patch(i, "p0")?,
            p1: self.patch(i, "p1")?,
            same_fraction: self.records[i].label,
        })
    }

    pub fn iter_two_afc(&self) -> impl Iterator<Item = Result<TwoAfcSample>> + '_ {
        (0..self.len()).map(|i| self.two_afc(i))
    }

    pub fn iter_jnd(&self) -> impl Iterator<Item = Result<JndSample>> + '_ {
        (0..self.len()).map(|i| self.jnd(i))
    }
}

/// Indexes `<root>/<part>/<split>/<category>/...` for every category.
pub fn load_bapps_split(root: impl AsRef<Path>, part: BappsPart, split: &str) -> Result<BappsIndex> {
    let base = root.as_ref().join(part.dir_name()).join(split);
    if !base.is_dir() {
        return Err(Error::Dataset(format!("missing subdirectory {}", base.display())));
    }
    let mut records = Vec::new();
    for category in sorted_entries(&base)? {
        if category.is_dir() {
            records.extend(index_category(part, &category)?);
        }
    }
    Ok(BappsIndex { part, records })
}

/// Evaluation split of either BAPPS part.
pub fn load_bapps(root: impl AsRef<Path>, part: BappsPart) -> Result<BappsIndex> {
    load_bapps_split(root, part, BAPPS_EVAL_SPLIT)
}
