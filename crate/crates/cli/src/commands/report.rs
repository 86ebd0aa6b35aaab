use std::path::PathBuf;

use anyhow::{bail, Context, Result};

use super::eval::WARNINGS_FILE;
use super::{create_dir, Outcome};
use crate::config::ExperimentConfig;
use dps_core::evaluation::report::{read_jsonl_file, Aggregate};

pub fn run(cfg: &ExperimentConfig, reports: Option<PathBuf>, out: Option<PathBuf>) -> Result<Outcome> {
    let dir = reports.unwrap_or_else(|| cfg.reports_dir());
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl") && !p.ends_with(WARNINGS_FILE))
        .collect();
    files.sort();
    let mut rows = Vec::new();
    for f in &files {
        rows.extend(read_jsonl_file(f).with_context(|| format!("reading {}", f.display()))?);
    }
    if rows.is_empty() {
        bail!("no reports found in {}", dir.display());
    }
    let agg = Aggregate::new(&rows)?;
    let out = out.unwrap_or_else(|| cfg.summary_dir());
    create_dir(&out)?;
    for (name, table) in [
        ("summary.csv", agg.summary()),
        ("deltas.csv", agg.deltas()),
        ("scatter.csv", agg.scatter()),
        ("spearman.csv", agg.spearman()),
    ] {
        let path = out.join(name);
        table
            .write_file(&path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "aggregated {} scores from {} files into {}",
        rows.len(),
        files.len(),
        out.display()
    );
    Ok(Outcome::Complete)
}
