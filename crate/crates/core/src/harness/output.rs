//! CSV files written by the harness. Headers are fixed; see the README.

use std::fs::{self, OpenOptions};
use std::path::Path;

use super::{ExperimentConfig, ReplicaOutcome};
use crate::dec::{LossWeights, Variant};
use crate::error::{Error, Result};
use crate::metrics::Scores;

pub const RESULTS_FILE: &str = "results.csv";
pub const HISTORY_FILE: &str = "history.csv";
pub const GRID_FILE: &str = "grid.csv";
pub const ABLATION_FILE: &str = "ablation.csv";

pub const RESULTS_HEADER: [&str; 19] = [
    "config_hash", "seed", "variant", "status", "acc", "nmi", "ari", "f1", "wall_seconds",
    "max_iter", "alpha", "beta", "gamma", "l_are", "l_akl", "l_gre", "l_gkl", "l_con", "error",
];

pub const HISTORY_HEADER: [&str; 14] = [
    "config_hash", "seed", "epoch", "l_are", "l_akl", "l_gre", "l_gkl", "l_con", "total",
    "max_row_error", "acc", "nmi", "ari", "f1",
];

pub const GRID_HEADER: [&str; 10] = [
    "alpha", "beta", "gamma", "seed", "status", "acc", "nmi", "ari", "f1", "error",
];

pub const ABLATION_HEADER: [&str; 8] = ["seed", "arm", "status", "acc", "nmi", "ari", "f1", "error"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Failed,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::Failed => "failed",
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn score_fields(s: Option<Scores>) -> [String; 4] {
    [
        opt(s.map(|s| s.acc)),
        opt(s.map(|s| s.nmi)),
        opt(s.map(|s| s.ari)),
        opt(s.map(|s| s.f1)),
    ]
}

/// One row of `results.csv`: a replica's read-out under one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub config_hash: String,
    pub seed: u64,
    pub variant: Variant,
    pub status: Status,
    pub scores: Option<Scores>,
    pub wall_seconds: f64,
    pub max_iter: usize,
    pub weights: LossWeights,
    pub final_terms: Option<[f64; 5]>,
    pub error: String,
}

impl ResultRow {
    pub fn from_outcome(hash: &str, cfg: &ExperimentConfig, o: &ReplicaOutcome, variant: Variant) -> Self {
        let (status, scores, final_terms, error) = match &o.result {
            Ok(r) => {
                let t = r.final_terms;
                (
                    Status::Ok,
                    r.score(variant),
                    Some([t.are, t.akl, t.gre, t.gkl, t.con]),
                    String::new(),
                )
            }
            Err(e) => (Status::Failed, None, None, e.to_string()),
        };
        Self {
            config_hash: hash.to_string(),
            seed: o.seed,
            variant,
            status,
            scores,
            wall_seconds: o.wall_seconds,
            max_iter: cfg.train.max_iter,
            weights: cfg.train.weights,
            final_terms,
            error,
        }
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.config_hash.clone(),
            self.seed.to_string(),
            self.variant.to_string(),
            self.status.as_str().to_string(),
        ];
        r.extend(score_fields(self.scores));
        r.push(format!("{:.3}", self.wall_seconds));
        r.push(self.max_iter.to_string());
        r.push(self.weights.alpha.to_string());
        r.push(self.weights.beta.to_string());
        r.push(self.weights.gamma.to_string());
        match self.final_terms {
            Some(t) => r.extend(t.iter().map(|v| v.to_string())),
            None => r.extend((0..5).map(|_| String::new())),
        }
        r.push(self.error.clone());
        r
    }
}

/// One row of `grid.csv`: the `Q_g` scores of one replica in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub weights: LossWeights,
    pub seed: u64,
    pub status: Status,
    pub scores: Option<Scores>,
    pub error: String,
}

impl GridRow {
    pub fn from_outcome(w: &LossWeights, o: &ReplicaOutcome) -> Self {
        let (status, scores, error) = match &o.result {
            Ok(r) => (Status::Ok, r.score(Variant::Qg), String::new()),
            Err(e) => (Status::Failed, None, e.to_string()),
        };
        Self {
            weights: *w,
            seed: o.seed,
            status,
            scores,
            error,
        }
    }
}

/// One row of `ablation.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub seed: u64,
    pub arm: &'static str,
    pub status: Status,
    pub scores: Option<Scores>,
    pub error: String,
}

impl AblationRow {
    pub fn new(seed: u64, arm: &'static str, o: &ReplicaOutcome, variant: Variant) -> Self {
        let (status, scores, error) = match &o.result {
            Ok(r) => (Status::Ok, r.score(variant), String::new()),
            Err(e) => (Status::Failed, None, e.to_string()),
        };
        Self {
            seed,
            arm,
            status,
            scores,
            error,
        }
    }
}

/// Opens `path` for appending, writing `header` if the file is new or empty
/// and refusing files whose header differs.
fn appender(path: &Path, header: &[&str]) -> Result<csv::Writer<fs::File>> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    if !fresh {
        let mut reader = csv::Reader::from_path(path)?;
        let existing: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if existing != header {
            return Err(Error::Parameter(format!(
                "{} has an unexpected header; refusing to append",
                path.display()
            )));
        }
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(header)?;
    }
    Ok(w)
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn append_results(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut w = appender(path, &RESULTS_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    finish(w, path)
}

pub fn append_history(path: &Path, hash: &str, outcomes: &[ReplicaOutcome]) -> Result<()> {
    let mut w = appender(path, &HISTORY_HEADER)?;
    for o in outcomes {
        let Ok(r) = &o.result else { continue };
        for e in &r.history.epochs {
            let t = e.terms;
            let mut rec = vec![hash.to_string(), o.seed.to_string(), e.epoch.to_string()];
            rec.extend([t.are, t.akl, t.gre, t.gkl, t.con, e.total, e.max_row_error].map(|v| v.to_string()));
            rec.extend(score_fields(e.scores));
            w.write_record(rec)?;
        }
    }
    finish(w, path)
}

pub fn write_grid(path: &Path, rows: &[GridRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(GRID_HEADER)?;
    for r in rows {
        let mut rec = vec![
            r.weights.alpha.to_string(),
            r.weights.beta.to_string(),
            r.weights.gamma.to_string(),
            r.seed.to_string(),
            r.status.as_str().to_string(),
        ];
        rec.extend(score_fields(r.scores));
        rec.push(r.error.clone());
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_ablation(path: &Path, rows: &[AblationRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ABLATION_HEADER)?;
    for r in rows {
        let mut rec = vec![r.seed.to_string(), r.arm.to_string(), r.status.as_str().to_string()];
        rec.extend(score_fields(r.scores));
        rec.push(r.error.clone());
        w.write_record(rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
