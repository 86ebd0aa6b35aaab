use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed weight container: {0}")]
    Container(String),

    #[error("layer {layer}: missing tensor `{name}`")]
    MissingTensor { layer: usize, name: String },

    #[error("layer {layer}: tensor `{name}` has shape {found:?}, expected {expected:?}")]
    TensorShape {
        layer: usize,
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },

    #[error("layer {layer}: tensor `{name}` has unsupported dtype `{dtype}`")]
    UnsupportedDtype { layer: usize, name: String, dtype: String },

    #[error("invalid network spec: {0}")]
    InvalidSpec(String),

    #[error("image {height}x{width} too small: layer {layer} would produce an empty grid")]
    ImageTooSmall { layer: usize, height: usize, width: usize },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("feature shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid ordering: {0}")]
    InvalidOrdering(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("image decode error on {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("non-finite loss {loss} at epoch {epoch}, batch {batch}; triplet: {triplet}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        loss: f64,
        triplet: String,
    },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
