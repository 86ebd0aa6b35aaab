pub mod eval;
pub mod orderings;
pub mod report;
pub mod train;
pub mod verify;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::Serialize;

#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Complete,
    /// Some cells failed; the rest completed.
    Partial(usize),
}

impl Outcome {
    pub fn from_failures(n: usize) -> Self {
        if n == 0 {
            Outcome::Complete
        } else {
            Outcome::Partial(n)
        }
    }
}

/// A skipped or failed sweep cell.
#[derive(Clone, Debug, Serialize)]
pub struct Warning {
    pub stage: &'static str,
    pub cell: String,
    pub message: String,
}

/// Runs one cell, turning panics into errors so siblings keep going.
pub fn isolated<T>(f: impl FnOnce() -> Result<T>) -> Result<T> {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "unknown panic".into());
        Err(anyhow!("panicked: {msg}"))
    })
}

/// Writes one JSON object per line; an empty list still leaves a file.
pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    let mut f = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f.write_all(&out).with_context(|| format!("writing {}", path.display()))
}

pub fn create_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}
