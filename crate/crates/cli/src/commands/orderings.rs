use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use super::{create_dir, Outcome};
use crate::config::{ordering_name, ExperimentConfig, Orderings};
use dps_core::distortions::DistortionOrdering;

pub fn run(cfg: &ExperimentConfig, count: Option<usize>, out: Option<PathBuf>) -> Result<Outcome> {
    let orderings = match count {
        Some(n) => DistortionOrdering::random_distinct(n, cfg.ordering_seed())?,
        None => cfg.orderings()?,
    };
    let dir = out.unwrap_or_else(|| cfg.orderings_dir());
    write_all(&dir, &orderings)?;
    let source = match (&cfg.orderings, count) {
        (Orderings::List(_), None) => "config".to_string(),
        _ => format!("seed {}", cfg.seed),
    };
    println!("wrote {} orderings ({source}) to {}", orderings.len(), dir.display());
    Ok(Outcome::Complete)
}

pub fn write_all(dir: &Path, orderings: &[DistortionOrdering]) -> Result<()> {
    create_dir(dir)?;
    for (i, o) in orderings.iter().enumerate() {
        let path = dir.join(format!("{}.json", ordering_name(i)));
        o.write(&path).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
