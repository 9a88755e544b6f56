//! Experiment orchestration: replicas, grid search, ablation and CSV output.

pub mod config;
pub mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

pub use config::{DatasetSource, ExperimentConfig};
pub use output::{AblationRow, GridRow, ResultRow, Status};

use crate::dec::{fit, save_checkpoint, History, LossTerms, LossWeights, ModelState, Variant};
use crate::error::{Error, Result};
use crate::graph::{build_knn_graph, AttributedNetwork};
use crate::io::{load_network, read_attributes, read_labels, save_network};
use crate::lfr::{disjoint_prototypes, generate, LfrSpec};
use crate::metrics::{evaluate_all, Scores};

/// Runs `f(0..jobs)` on up to `threads` scoped workers; results keep job order.
pub fn parallel_map<T: Send>(jobs: usize, threads: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let threads = threads.clamp(1, jobs.max(1));
    if threads == 1 {
        return (0..jobs).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..jobs).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= jobs {
                    break;
                }
                let v = f(i);
                slots.lock().unwrap()[i] = Some(v);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|v| v.expect("every job ran"))
        .collect()
}

/// The network used by replica `index`. LFR sources generate a fresh network
/// from seed `master + index`; file sources load the same data every time.
pub fn load_dataset(cfg: &ExperimentConfig, index: usize) -> Result<AttributedNetwork> {
    match &cfg.source {
        DatasetSource::Lfr(spec) => generate(&spec.with_seed(replica_seed(cfg, index))),
        DatasetSource::Files { edges, attrs, labels } => load_network(edges, attrs, labels.as_deref()),
        DatasetSource::Features {
            attrs,
            labels,
            k,
            metric,
        } => {
            let x = read_attributes(attrs)?;
            let labels = labels.as_deref().map(read_labels).transpose()?;
            let knn = build_knn_graph(&x, *k, *metric)?;
            AttributedNetwork::new(knn.adjacency, x, labels)
        }
    }
}

pub fn replica_seed(cfg: &ExperimentConfig, index: usize) -> u64 {
    cfg.train.seed.wrapping_add(index as u64)
}

/// A completed training run.
#[derive(Debug, Clone)]
pub struct ReplicaResult {
    /// Scores per read-out, when ground truth is available.
    pub scores: Option<Vec<(Variant, Scores)>>,
    pub final_terms: LossTerms,
    pub history: History,
    pub state: ModelState,
}

impl ReplicaResult {
    pub fn score(&self, v: Variant) -> Option<Scores> {
        self.scores
            .as_ref()
            .and_then(|s| s.iter().find(|(w, _)| *w == v).map(|(_, sc)| *sc))
    }
}

#[derive(Debug)]
pub struct ReplicaOutcome {
    pub index: usize,
    pub seed: u64,
    pub wall_seconds: f64,
    pub result: Result<ReplicaResult>,
}

/// Trains on `net` with seed `seed` and scores every read-out.
pub fn run_on_network(cfg: &ExperimentConfig, net: &AttributedNetwork, seed: u64) -> Result<ReplicaResult> {
    let k = match (cfg.clusters, net.num_clusters()) {
        (Some(k), _) | (None, Some(k)) => k,
        (None, None) => {
            return Err(Error::Parameter(
                "number of clusters unknown: set `clusters` or supply labels".into(),
            ))
        }
    };
    let ae = cfg.ae_config(net.attr_dim(), net.has_binary_attributes())?;
    let mut train = cfg.train.clone();
    train.seed = seed;
    let fit = fit(net, k, &ae, &cfg.gae, &train, cfg.track_metrics)?;
    let scores = net
        .labels()
        .map(|truth| {
            Variant::ALL
                .iter()
                .map(|&v| Ok((v, evaluate_all(fit.outputs.labels(v), truth)?)))
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    let final_terms = fit.history.last().map(|e| e.terms).unwrap_or_default();
    Ok(ReplicaResult {
        scores,
        final_terms,
        history: fit.history,
        state: fit.state,
    })
}

fn run_one(cfg: &ExperimentConfig, shared: Option<&AttributedNetwork>, index: usize) -> ReplicaOutcome {
    let seed = replica_seed(cfg, index);
    let start = Instant::now();
    let result = match shared {
        Some(net) => run_on_network(cfg, net, seed),
        None => load_dataset(cfg, index).and_then(|net| run_on_network(cfg, &net, seed)),
    };
    ReplicaOutcome {
        index,
        seed,
        wall_seconds: start.elapsed().as_secs_f64(),
        result,
    }
}

/// Runs every replica; a failure is kept in its outcome and never stops the others.
pub fn run_replicas(cfg: &ExperimentConfig) -> Vec<ReplicaOutcome> {
    let shared = match &cfg.source {
        DatasetSource::Lfr(_) => None,
        _ => match load_dataset(cfg, 0) {
            Ok(net) => Some(net),
            Err(e) => {
                let msg = e.to_string();
                return (0..cfg.replicas)
                    .map(|index| ReplicaOutcome {
                        index,
                        seed: replica_seed(cfg, index),
                        wall_seconds: 0.0,
                        result: Err(Error::Parameter(msg.clone())),
                    })
                    .collect();
            }
        },
    };
    parallel_map(cfg.replicas, cfg.threads, |i| run_one(cfg, shared.as_ref(), i))
}

/// Directory names written by [`cmd_generate`].
pub fn replica_dir_name(index: usize) -> String {
    format!("replica_{index:02}")
}

/// Writes `replicas` LFR networks with seeds `spec.seed + i`, a `spec.txt`
/// in each and a `manifest.txt` listing the directories.
pub fn cmd_generate(spec: &LfrSpec, replicas: usize, out_dir: &Path) -> Result<Vec<PathBuf>> {
    spec.validate()?;
    if replicas == 0 {
        return Err(Error::Parameter("replicas must be at least 1".into()));
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut dirs = Vec::with_capacity(replicas);
    let mut manifest = String::new();
    for i in 0..replicas {
        let s = spec.with_seed(spec.seed.wrapping_add(i as u64));
        let net = generate(&s).map_err(|e| Error::Generation(format!("replica {i}: {e}")))?;
        let name = replica_dir_name(i);
        let dir = out_dir.join(&name);
        save_network(&net, &dir)?;
        let k = net.num_clusters().unwrap_or(0);
        let overlap = if disjoint_prototypes(k, s.attr_dim, s.attrs_per_cluster) {
            "disjoint"
        } else {
            "overlapping"
        };
        let mut text = s.to_kv();
        text.push_str(&format!("clusters={k}\nprototypes={overlap}\n"));
        if let Some(f) = net.external_edge_fraction() {
            text.push_str(&format!("realized_mu={f}\n"));
        }
        let path = dir.join("spec.txt");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        manifest.push_str(&name);
        manifest.push('\n');
        dirs.push(dir);
    }
    let path = out_dir.join("manifest.txt");
    fs::write(&path, manifest).map_err(|e| Error::io(&path, e))?;
    Ok(dirs)
}

/// Outcome of a command that ran several replicas.
#[derive(Debug)]
pub struct TrainReport {
    pub outcomes: Vec<ReplicaOutcome>,
    pub rows: Vec<ResultRow>,
}

impl TrainReport {
    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_err()).count()
    }

    /// Mean score of `variant` over successful replicas.
    pub fn mean(&self, variant: Variant) -> Option<Scores> {
        mean_scores(self.outcomes.iter().filter_map(|o| o.result.as_ref().ok()?.score(variant)))
    }
}

pub fn mean_scores(it: impl Iterator<Item = Scores>) -> Option<Scores> {
    let all: Vec<Scores> = it.collect();
    if all.is_empty() {
        return None;
    }
    let n = all.len() as f64;
    Some(Scores {
        acc: all.iter().map(|s| s.acc).sum::<f64>() / n,
        nmi: all.iter().map(|s| s.nmi).sum::<f64>() / n,
        ari: all.iter().map(|s| s.ari).sum::<f64>() / n,
        f1: all.iter().map(|s| s.f1).sum::<f64>() / n,
    })
}

fn result_rows(cfg: &ExperimentConfig, outcomes: &[ReplicaOutcome]) -> Vec<ResultRow> {
    let hash = cfg.hash();
    let mut rows = Vec::new();
    for o in outcomes {
        for v in Variant::ALL {
            rows.push(ResultRow::from_outcome(&hash, cfg, o, v));
        }
    }
    rows
}

/// Trains every replica, appends four rows per replica to `results.csv`,
/// the per-epoch terms to `history.csv`, and a checkpoint per successful run.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<TrainReport> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let outcomes = run_replicas(cfg);
    let rows = result_rows(cfg, &outcomes);
    output::append_results(&cfg.out_dir.join(output::RESULTS_FILE), &rows)?;
    output::append_history(&cfg.out_dir.join(output::HISTORY_FILE), &cfg.hash(), &outcomes)?;
    let ckpt_dir = cfg.out_dir.join("checkpoints");
    for o in &outcomes {
        if let Ok(r) = &o.result {
            fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
            save_checkpoint(&r.state, &ckpt_dir.join(format!("{}_seed{}.ckpt", cfg.hash(), o.seed)))?;
        }
    }
    Ok(TrainReport { outcomes, rows })
}

#[derive(Debug, Clone)]
pub struct GridCell {
    pub weights: LossWeights,
    pub mean_qg: Option<Scores>,
    pub failures: usize,
}

#[derive(Debug, Clone)]
pub struct GridReport {
    pub rows: Vec<GridRow>,
    pub cells: Vec<GridCell>,
    /// Index into `cells` of the cell with the highest mean `Q_g` accuracy.
    pub best: Option<usize>,
}

/// Trains every `(α, β, γ)` combination over all replicas, ranks cells by
/// mean `Q_g` accuracy and writes `grid.csv` once at the end.
pub fn cmd_grid_search(
    cfg: &ExperimentConfig,
    alphas: &[f64],
    betas: &[f64],
    gammas: &[f64],
) -> Result<GridReport> {
    cfg.validate()?;
    for (name, set) in [("alpha", alphas), ("beta", betas), ("gamma", gammas)] {
        if set.is_empty() || set.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Parameter(format!("{name} values must be a non-empty subset of [0, 1]")));
        }
    }
    let combos: Vec<LossWeights> = alphas
        .iter()
        .flat_map(|&a| betas.iter().flat_map(move |&b| gammas.iter().map(move |&g| LossWeights { alpha: a, beta: b, gamma: g })))
        .collect();
    let shared = match &cfg.source {
        DatasetSource::Lfr(_) => None,
        _ => Some(load_dataset(cfg, 0)?),
    };
    let jobs = combos.len() * cfg.replicas;
    let outcomes = parallel_map(jobs, cfg.threads, |j| {
        let cell_cfg = cfg.with_weights(combos[j / cfg.replicas]);
        run_one(&cell_cfg, shared.as_ref(), j % cfg.replicas)
    });

    let mut rows = Vec::with_capacity(jobs);
    let mut cells = Vec::with_capacity(combos.len());
    for (c, w) in combos.iter().enumerate() {
        let cell = &outcomes[c * cfg.replicas..(c + 1) * cfg.replicas];
        for o in cell {
            rows.push(GridRow::from_outcome(w, o));
        }
        cells.push(GridCell {
            weights: *w,
            mean_qg: mean_scores(cell.iter().filter_map(|o| o.result.as_ref().ok()?.score(Variant::Qg))),
            failures: cell.iter().filter(|o| o.result.is_err()).count(),
        });
    }
    let mut best: Option<usize> = None;
    for (i, c) in cells.iter().enumerate() {
        if let Some(s) = c.mean_qg {
            if best.is_none_or(|b| s.acc > cells[b].mean_qg.unwrap().acc) {
                best = Some(i);
            }
        }
    }
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    output::write_grid(&cfg.out_dir.join(output::GRID_FILE), &rows)?;
    Ok(GridReport { rows, cells, best })
}

/// Arms of the consistency ablation.
pub const ABLATION_ARMS: [&str; 3] = ["DCP-DEC", "DCP-W/G", "DCP-W/A"];

#[derive(Debug)]
pub struct AblationReport {
    pub rows: Vec<AblationRow>,
    pub full: Vec<ReplicaOutcome>,
    pub no_consistency: Vec<ReplicaOutcome>,
}

impl AblationReport {
    /// Mean accuracy per arm over the seeds where that arm succeeded.
    pub fn mean_acc(&self, arm: &str) -> Option<f64> {
        let v: Vec<f64> = self
            .rows
            .iter()
            .filter(|r| r.arm == arm)
            .filter_map(|r| r.scores.map(|s| s.acc))
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Runs the configured model and its `γ = 0` variant on the same seeds and
/// writes `ablation.csv` with three arms per seed: the full model's `Q_g`,
/// and the `γ = 0` model's `Q_g` (graph view) and `Q_a` (attribute view).
pub fn cmd_ablate(cfg: &ExperimentConfig) -> Result<AblationReport> {
    cfg.validate()?;
    let full = run_replicas(cfg);
    let zero_cfg = cfg.with_weights(LossWeights {
        gamma: 0.0,
        ..cfg.train.weights
    });
    let no_consistency = if cfg.train.weights.gamma == 0.0 {
        Vec::new()
    } else {
        run_replicas(&zero_cfg)
    };
    let ablated = if no_consistency.is_empty() { &full } else { &no_consistency };
    let mut rows = Vec::new();
    for (f, z) in full.iter().zip(ablated) {
        rows.push(AblationRow::new(f.seed, ABLATION_ARMS[0], f, Variant::Qg));
        rows.push(AblationRow::new(z.seed, ABLATION_ARMS[1], z, Variant::Qg));
        rows.push(AblationRow::new(z.seed, ABLATION_ARMS[2], z, Variant::Qa));
    }
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    output::write_ablation(&cfg.out_dir.join(output::ABLATION_FILE), &rows)?;
    Ok(AblationReport {
        rows,
        full,
        no_consistency,
    })
}

/// Scores a prediction file against a label file.
pub fn cmd_eval(labels_path: &Path, pred_path: &Path) -> Result<Scores> {
    let truth = read_labels(labels_path)?;
    let pred = read_labels(pred_path)?;
    if truth.len() != pred.len() {
        return Err(Error::Labels(format!(
            "{} has {} labels but {} has {}",
            labels_path.display(),
            truth.len(),
            pred_path.display(),
            pred.len()
        )));
    }
    evaluate_all(&pred, &truth)
}
