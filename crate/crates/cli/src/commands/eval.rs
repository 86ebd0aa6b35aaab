use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use super::{create_dir, isolated, write_jsonl, Outcome, Warning};
use crate::config::{ordering_name, ExperimentConfig, NamedSource};
use dps_core::adaption::{AdaptionRun, MANIFEST_FILE};
use dps_core::distortions::DistortionOrdering;
use dps_core::evaluation::report::{write_csv, write_jsonl as write_reports};
use dps_core::evaluation::{
    eval_bapps_jnd, eval_bapps_two_afc, eval_ordering, load_bapps, BappsIndex, BappsPart, EvalReport, ImageSource,
    MetricLabel,
};
use dps_core::metric::{DpsMetric, FeatureExtractor};
use dps_core::similarity::ComparisonMethod;
use dps_core::LoadedNetwork;

pub const REPORTS_FILE: &str = "reports.jsonl";
pub const REPORTS_CSV: &str = "reports.csv";
pub const WARNINGS_FILE: &str = "warnings.jsonl";
const BAPPS: &str = "bapps";

struct Bapps {
    two_afc: BappsIndex,
    jnd: BappsIndex,
}

struct Inputs<'a> {
    cfg: &'a ExperimentConfig,
    networks: Vec<Arc<LoadedNetwork>>,
    orderings: Vec<DistortionOrdering>,
    datasets: Vec<NamedSource>,
    bapps: Option<Bapps>,
}

#[derive(Clone, Copy)]
struct Cell {
    network: usize,
    method: ComparisonMethod,
    ordering: usize,
    repeat: Option<u32>,
}

pub fn run(cfg: &ExperimentConfig, baseline_only: bool) -> Result<Outcome> {
    let ctx = Inputs {
        cfg,
        networks: cfg.networks.iter().map(|n| n.load()).collect::<Result<_>>()?,
        orderings: cfg.orderings()?,
        datasets: cfg.eval_data.iter().map(|d| d.open()).collect::<Result<_>>()?,
        bapps: match &cfg.bapps {
            Some(root) => Some(Bapps {
                two_afc: load_bapps(root, BappsPart::TwoAfc).context("BAPPS 2AFC")?,
                jnd: load_bapps(root, BappsPart::Jnd).context("BAPPS JND")?,
            }),
            None => None,
        },
    };
    if ctx.datasets.is_empty() && ctx.bapps.is_none() {
        bail!("nothing to evaluate: no eval_data and no bapps root configured");
    }
    cfg.write_resolved("eval_config.json")?;

    let pairs: Vec<(usize, ComparisonMethod)> = (0..ctx.networks.len())
        .flat_map(|n| cfg.methods.iter().map(move |&m| (n, m)))
        .collect();

    // BAPPS does not depend on the ordering, so baselines are scored once.
    let baseline_bapps: BTreeMap<(usize, ComparisonMethod), Result<Vec<EvalReport>>> = pairs
        .par_iter()
        .map(|&(n, m)| {
            let label = MetricLabel::baseline(&cfg.networks[n].name, m);
            let metric = DpsMetric::baseline(ctx.networks[n].clone(), m, cfg.normalize);
            ((n, m), isolated(|| score_bapps(&ctx, &metric, &label)))
        })
        .collect();

    let mut cells = Vec::new();
    for &(network, method) in &pairs {
        for ordering in 0..ctx.orderings.len() {
            cells.push(Cell {
                network,
                method,
                ordering,
                repeat: None,
            });
            if !baseline_only {
                for r in 0..cfg.repeats as u32 {
                    cells.push(Cell {
                        network,
                        method,
                        ordering,
                        repeat: Some(r),
                    });
                }
            }
        }
    }

    let results: Vec<Result<Vec<EvalReport>>> = cells
        .par_iter()
        .map(|c| {
            isolated(|| {
                let mut rows = score_cell(&ctx, c)?;
                if c.repeat.is_none() {
                    match &baseline_bapps[&(c.network, c.method)] {
                        Ok(b) => rows.extend(b.iter().cloned().map(|mut r| {
                            r.ordering = Some(ctx.orderings[c.ordering].to_string());
                            r
                        })),
                        Err(e) => bail!("baseline BAPPS scores: {e:#}"),
                    }
                }
                Ok(rows)
            })
        })
        .collect();

    let mut reports = Vec::new();
    let mut warnings = Vec::new();
    for (c, r) in cells.iter().zip(results) {
        match r {
            Ok(rows) => reports.extend(rows),
            Err(e) => {
                let cell = cell_name(&ctx, c);
                log::warn!("skipped {cell}: {e:#}");
                warnings.push(Warning {
                    stage: "eval",
                    cell,
                    message: format!("{e:#}"),
                });
            }
        }
    }

    let dir = cfg.reports_dir();
    create_dir(&dir)?;
    let jsonl = dir.join(REPORTS_FILE);
    write_reports(
        BufWriter::new(File::create(&jsonl).with_context(|| format!("creating {}", jsonl.display()))?),
        &reports,
    )?;
    let csv = dir.join(REPORTS_CSV);
    write_csv(
        File::create(&csv).with_context(|| format!("creating {}", csv.display()))?,
        &reports,
    )?;
    write_jsonl(&dir.join(WARNINGS_FILE), &warnings)?;
    println!(
        "wrote {} scores for {} cells to {} ({} skipped)",
        reports.len(),
        cells.len() - warnings.len(),
        jsonl.display(),
        warnings.len()
    );
    Ok(Outcome::from_failures(warnings.len()))
}

fn cell_name(ctx: &Inputs, c: &Cell) -> String {
    let variant = match c.repeat {
        Some(r) => format!("repeat_{r}"),
        None => "baseline".into(),
    };
    format!(
        "{}/{}/{}/{variant}",
        ctx.cfg.networks[c.network].name,
        c.method,
        ordering_name(c.ordering)
    )
}

fn score_bapps(ctx: &Inputs, metric: &DpsMetric, label: &MetricLabel) -> Result<Vec<EvalReport>> {
    let Some(b) = &ctx.bapps else {
        return Ok(Vec::new());
    };
    Ok(vec![
        eval_bapps_two_afc(metric, label, &b.two_afc, BAPPS)?,
        eval_bapps_jnd(metric, label, &b.jnd, BAPPS)?,
    ])
}

fn score_cell(ctx: &Inputs, c: &Cell) -> Result<Vec<EvalReport>> {
    let cfg = ctx.cfg;
    let name = &cfg.networks[c.network].name;
    let net = &ctx.networks[c.network];
    let ordering = &ctx.orderings[c.ordering];
    let (metric, label) = match c.repeat {
        None => (
            DpsMetric::baseline(net.clone(), c.method, cfg.normalize),
            MetricLabel::baseline(name, c.method),
        ),
        Some(r) => {
            let dir = cfg.cell_dir(name, c.method, c.ordering, r);
            if !dir.join(MANIFEST_FILE).is_file() {
                bail!("no checkpoint at {}", dir.display());
            }
            let run = AdaptionRun::load(&dir).with_context(|| format!("loading {}", dir.display()))?;
            let m = &run.manifest;
            if m.network_checksum != net.checksum() {
                bail!("checkpoint {} was trained on different network weights", dir.display());
            }
            if m.metric.method != c.method || &m.ordering != ordering {
                bail!("checkpoint {} belongs to another method or ordering", dir.display());
            }
            let extractor = FeatureExtractor::new(net.clone(), m.metric.normalize);
            (
                DpsMetric::new(extractor, c.method, run.weights),
                MetricLabel::adapted(name, c.method, r),
            )
        }
    };
    let seed = cfg.eval_seed(c.ordering);
    let mut rows = ctx
        .datasets
        .iter()
        .map(|d| eval_ordering(&metric, &label, d, ordering, seed).with_context(|| format!("dataset `{}`", d.id())))
        .collect::<Result<Vec<_>>>()?;
    if c.repeat.is_some() {
        rows.extend(score_bapps(ctx, &metric, &label)?.into_iter().map(|mut r| {
            r.ordering = Some(ordering.to_string());
            r
        }));
    }
    Ok(rows)
}
