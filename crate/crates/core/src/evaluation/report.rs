//! Evaluation records and their aggregation into summary tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{mean, spearman, std_dev};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScoreKind {
    #[serde(rename = "2afc")]
    TwoAfc,
    #[serde(rename = "jnd_map")]
    JndMap,
}

impl ScoreKind {
    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::TwoAfc => "2afc",
            ScoreKind::JndMap => "jnd_map",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const BASELINE: &str = "baseline";
pub const ADAPTED: &str = "adapted";

/// Identifies the metric a report was computed for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricLabel {
    pub network: String,
    pub method: String,
    pub variant: String,
    pub repeat: Option<u32>,
}

impl MetricLabel {
    pub fn baseline(network: impl Into<String>, method: impl fmt::Display) -> Self {
        Self {
            network: network.into(),
            method: method.to_string(),
            variant: BASELINE.into(),
            repeat: None,
        }
    }

    pub fn adapted(network: impl Into<String>, method: impl fmt::Display, repeat: u32) -> Self {
        Self {
            network: network.into(),
            method: method.to_string(),
            variant: ADAPTED.into(),
            repeat: Some(repeat),
        }
    }

    pub fn id(&self) -> String {
        match self.repeat {
            Some(r) => format!("{}/{}/{}/{r}", self.network, self.method, self.variant),
            None => format!("{}/{}/{}", self.network, self.method, self.variant),
        }
    }
}

/// One score. Serialized flat so JSON lines and CSV share columns.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub network: String,
    pub method: String,
    pub variant: String,
    pub repeat: Option<u32>,
    pub ordering: Option<String>,
    pub dataset: String,
    pub score_kind: ScoreKind,
    pub value: f64,
    pub samples: usize,
    pub seed: u64,
}

impl EvalReport {
    pub fn new(
        label: &MetricLabel,
        ordering: Option<String>,
        dataset: impl Into<String>,
        score_kind: ScoreKind,
        value: f64,
        samples: usize,
        seed: u64,
    ) -> Self {
        Self {
            network: label.network.clone(),
            method: label.method.clone(),
            variant: label.variant.clone(),
            repeat: label.repeat,
            ordering,
            dataset: dataset.into(),
            score_kind,
            value,
            samples,
            seed,
        }
    }

    pub fn label(&self) -> MetricLabel {
        MetricLabel {
            network: self.network.clone(),
            method: self.method.clone(),
            variant: self.variant.clone(),
            repeat: self.repeat,
        }
    }

    /// Column name used for this score in wide tables.
    pub fn column(&self) -> String {
        format!("{}_{}", self.dataset, self.score_kind)
    }
}

pub const CSV_COLUMNS: [&str; 10] = [
    "network",
    "method",
    "variant",
    "repeat",
    "ordering",
    "dataset",
    "score_kind",
    "value",
    "samples",
    "seed",
];

pub fn write_jsonl<W: Write>(mut out: W, reports: &[EvalReport]) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n").map_err(|e| Error::io("<reports>", e))?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<EvalReport>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("<reports>", e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn read_jsonl_file(path: impl AsRef<Path>) -> Result<Vec<EvalReport>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl(std::io::BufReader::new(f))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Dataset(format!("csv: {e}"))
}

pub fn write_csv<W: Write>(out: W, reports: &[EvalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if reports.is_empty() {
        w.write_record(CSV_COLUMNS).map_err(csv_error)?;
    }
    for r in reports {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::io("<reports>", e))
}

/// A plain table ready for CSV export.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).map_err(csv_error)?;
        for row in &self.rows {
            w.write_record(row).map_err(csv_error)?;
        }
        w.flush().map_err(|e| Error::io("<table>", e))
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

fn fmt_value(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct CellKey {
    network: String,
    method: String,
    variant: String,
    ordering: String,
    repeat: Option<u32>,
}

/// Scores indexed by cell and column, duplicates averaged.
#[derive(Clone, Debug, Default)]
pub struct Aggregate {
    cells: BTreeMap<CellKey, BTreeMap<String, f64>>,
    columns: BTreeSet<String>,
}

impl Aggregate {
    pub fn new(reports: &[EvalReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::EmptySamples);
        }
        let mut raw: BTreeMap<(CellKey, String), Vec<f64>> = BTreeMap::new();
        for r in reports {
            let key = CellKey {
                network: r.network.clone(),
                method: r.method.clone(),
                variant: r.variant.clone(),
                ordering: r.ordering.clone().unwrap_or_default(),
                repeat: r.repeat,
            };
            raw.entry((key, r.column())).or_default().push(r.value);
        }
        let mut agg = Self::default();
        for ((key, column), values) in raw {
            agg.columns.insert(column.clone());
            agg.cells
                .entry(key)
                .or_default()
                .insert(column, mean(&values).expect("non-empty"));
        }
        Ok(agg)
    }

    pub fn columns(&self) -> Vec<String> {
        self.columns.iter().cloned().collect()
    }

    /// Mean and standard deviation over orderings and repeats, one row per
    /// (network, method, variant).
    pub fn summary(&self) -> Table {
        let columns = self.columns();
        let mut groups: BTreeMap<(String, String, String), BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
        for (key, scores) in &self.cells {
            let g = groups
                .entry((key.network.clone(), key.method.clone(), key.variant.clone()))
                .or_default();
            for (c, v) in scores {
                g.entry(c.as_str()).or_default().push(*v);
            }
        }
        let mut header: Vec<String> = ["network", "method", "variant"].map(String::from).to_vec();
        for c in &columns {
            header.push(format!("{c}_mean"));
            header.push(format!("{c}_std"));
            header.push(format!("{c}_n"));
        }
        let rows = groups
            .into_iter()
            .map(|((network, method, variant), g)| {
                let mut row = vec![network, method, variant];
                for c in &columns {
                    let values = g.get(c.as_str()).map(Vec::as_slice).unwrap_or(&[]);
                    row.push(fmt_value(mean(values)));
                    row.push(fmt_value(std_dev(values)));
                    row.push(values.len().to_string());
                }
                row
            })
            .collect();
        Table { header, rows }
    }

    /// Per (network, method, ordering, column): the baseline score, the mean
    /// and standard deviation of adapted repeats, and their difference.
    fn paired(&self) -> BTreeMap<(String, String, String, String), (Vec<f64>, Vec<f64>)> {
        let mut out: BTreeMap<_, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for (key, scores) in &self.cells {
            for (c, v) in scores {
                let e = out
                    .entry((key.network.clone(), key.method.clone(), key.ordering.clone(), c.clone()))
                    .or_default();
                match key.variant.as_str() {
                    BASELINE => e.0.push(*v),
                    ADAPTED => e.1.push(*v),
                    _ => {}
                }
            }
        }
        out
    }

    pub fn deltas(&self) -> Table {
        let header = [
            "network",
            "method",
            "ordering",
            "score",
            "baseline",
            "adapted_mean",
            "adapted_std",
            "adapted_n",
            "delta",
        ]
        .map(String::from)
        .to_vec();
        let rows = self
            .paired()
            .into_iter()
            .map(|((network, method, ordering, column), (base, adapted))| {
                let b = mean(&base);
                let a = mean(&adapted);
                let delta = b.zip(a).map(|(b, a)| a - b);
                vec![
                    network,
                    method,
                    ordering,
                    column,
                    fmt_value(b),
                    fmt_value(a),
                    fmt_value(std_dev(&adapted)),
                    adapted.len().to_string(),
                    fmt_value(delta),
                ]
            })
            .collect();
        Table { header, rows }
    }

    /// Rank correlation, over orderings, between baseline scores and the
    /// mean adapted scores, per (network, method, column).
    pub fn spearman(&self) -> Table {
        let mut groups: BTreeMap<(String, String, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
        for ((network, method, _ordering, column), (base, adapted)) in self.paired() {
            if let (Some(b), Some(a)) = (mean(&base), mean(&adapted)) {
                let g = groups.entry((network, method, column)).or_default();
                g.0.push(b);
                g.1.push(a);
            }
        }
        let header = ["network", "method", "score", "orderings", "spearman"]
            .map(String::from)
            .to_vec();
        let rows = groups
            .into_iter()
            .map(|((network, method, column), (b, a))| {
                vec![
                    network,
                    method,
                    column,
                    b.len().to_string(),
                    fmt_value(spearman(&b, &a)),
                ]
            })
            .collect();
        Table { header, rows }
    }

    /// One row per cell with every score as a column.
    pub fn scatter(&self) -> Table {
        let columns = self.columns();
        let mut header: Vec<String> = ["network", "method", "variant", "ordering", "repeat"]
            .map(String::from)
            .to_vec();
        header.extend(columns.iter().cloned());
        let rows = self
            .cells
            .iter()
            .map(|(key, scores)| {
                let mut row = vec![
                    key.network.clone(),
                    key.method.clone(),
                    key.variant.clone(),
                    key.ordering.clone(),
                    key.repeat.map(|r| r.to_string()).unwrap_or_default(),
                ];
                row.extend(columns.iter().map(|c| fmt_value(scores.get(c).copied())));
                row
            })
            .collect();
        Table { header, rows }
    }
}
