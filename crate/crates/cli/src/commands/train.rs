use std::sync::Arc;

use anyhow::{Context, Result};
use rayon::prelude::*;

use super::{create_dir, isolated, orderings, write_jsonl, Outcome, Warning};
use crate::config::{ordering_name, ExperimentConfig};
use dps_core::adaption::{train_repeat, MANIFEST_FILE};
use dps_core::distortions::DistortionOrdering;
use dps_core::metric::FeatureExtractor;
use dps_core::similarity::ComparisonMethod;
use dps_core::LoadedNetwork;

pub const FAILURES_FILE: &str = "train_failures.jsonl";

struct Cell {
    network: usize,
    method: ComparisonMethod,
    ordering: usize,
    repeat: u32,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    let orderings = cfg.orderings()?;
    orderings::write_all(&cfg.orderings_dir(), &orderings)?;
    cfg.write_resolved("train_config.json")?;
    let source = cfg.train_data.open()?;
    let networks = cfg
        .networks
        .iter()
        .map(|n| n.load())
        .collect::<Result<Vec<Arc<LoadedNetwork>>>>()?;

    let mut cells = Vec::new();
    let mut done = 0;
    for network in 0..networks.len() {
        for &method in &cfg.methods {
            for ordering in 0..orderings.len() {
                for repeat in 0..cfg.repeats as u32 {
                    let dir = cfg.cell_dir(&cfg.networks[network].name, method, ordering, repeat);
                    if dir.join(MANIFEST_FILE).is_file() {
                        done += 1;
                    } else {
                        cells.push(Cell {
                            network,
                            method,
                            ordering,
                            repeat,
                        });
                    }
                }
            }
        }
    }
    log::info!("{} cells to train, {done} already complete", cells.len());

    let failures: Vec<Warning> = cells
        .par_iter()
        .filter_map(|c| {
            let name = cell_name(cfg, c);
            let result = isolated(|| train_cell(cfg, &source, &networks, &orderings, c));
            match result {
                Ok(()) => {
                    log::info!("trained {name}");
                    None
                }
                Err(e) => {
                    log::error!("{name}: {e:#}");
                    Some(Warning {
                        stage: "train",
                        cell: name,
                        message: format!("{e:#}"),
                    })
                }
            }
        })
        .collect();

    write_jsonl(&cfg.output.join(FAILURES_FILE), &failures)?;
    println!(
        "trained {} cells, {done} skipped as complete, {} failed",
        cells.len() - failures.len(),
        failures.len()
    );
    Ok(Outcome::from_failures(failures.len()))
}

fn cell_name(cfg: &ExperimentConfig, c: &Cell) -> String {
    format!(
        "{}/{}/{}/repeat_{}",
        cfg.networks[c.network].name,
        c.method,
        ordering_name(c.ordering),
        c.repeat
    )
}

fn train_cell(
    cfg: &ExperimentConfig,
    source: &crate::config::NamedSource,
    networks: &[Arc<LoadedNetwork>],
    orderings: &[DistortionOrdering],
    c: &Cell,
) -> Result<()> {
    let extractor = FeatureExtractor::new(networks[c.network].clone(), cfg.normalize);
    let run = train_repeat(
        source,
        &orderings[c.ordering],
        &extractor,
        c.method,
        &cfg.train_config(c.ordering),
        c.repeat,
    )?;
    let dir = cfg.cell_dir(&cfg.networks[c.network].name, c.method, c.ordering, c.repeat);
    create_dir(&dir)?;
    run.save(&dir).with_context(|| format!("saving {}", dir.display()))
}
