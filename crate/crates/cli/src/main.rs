use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dcpdec::dec::Variant;
use dcpdec::harness::{
    cmd_ablate, cmd_eval, cmd_generate, cmd_grid_search, cmd_train, DatasetSource, ExperimentConfig,
    ABLATION_ARMS,
};
use dcpdec::KnnMetric;

#[derive(Parser)]
#[command(name = "dcpdec", version, about = "Deep embedded clustering of attributed networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write LFR benchmark networks and a manifest.
    Generate(Common),
    /// Pretrain and train one model per replica; append to results.csv.
    Train(Common),
    /// Train every (alpha, beta, gamma) combination; write grid.csv.
    GridSearch(Common),
    /// Compare the model against its gamma = 0 variant; write ablation.csv.
    Ablate(Common),
    /// Score a prediction file against ground-truth labels.
    Eval {
        labels: PathBuf,
        predictions: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed; replica i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicas: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated values (a single value outside grid-search).
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    gamma: Vec<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Neighbours per node when building a kNN graph from features.
    #[arg(long)]
    k: Option<usize>,
    /// Distance for the kNN graph.
    #[arg(long)]
    metric: Option<KnnMetric>,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<dcpdec::Error> for Failure {
    fn from(e: dcpdec::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn single(name: &str, values: &[f64]) -> Result<Option<f64>, Failure> {
    match values {
        [] => Ok(None),
        [v] => Ok(Some(*v)),
        _ => Err(Failure::Usage(format!("--{name} takes one value outside grid-search"))),
    }
}

/// Loads the config file (or defaults) and applies command-line overrides.
fn build_config(c: &Common, grid: bool) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.train.seed = s;
    }
    if let Some(r) = c.replicas {
        cfg.replicas = r;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    if let Some(m) = c.max_iter {
        cfg.train.max_iter = m;
    }
    if !grid {
        if let Some(a) = single("alpha", &c.alpha)? {
            cfg.train.weights.alpha = a;
        }
        if let Some(b) = single("beta", &c.beta)? {
            cfg.train.weights.beta = b;
        }
        if let Some(g) = single("gamma", &c.gamma)? {
            cfg.train.weights.gamma = g;
        }
    }
    if c.k.is_some() || c.metric.is_some() {
        match &mut cfg.source {
            DatasetSource::Features { k, metric, .. } => {
                if let Some(v) = c.k {
                    *k = v;
                }
                if let Some(v) = c.metric {
                    *metric = v;
                }
            }
            _ => {
                return Err(Failure::Usage(
                    "--k and --metric only apply to a `features` dataset".into(),
                ))
            }
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_means(label: &str, report: &dcpdec::harness::TrainReport) {
    for v in Variant::ALL {
        if let Some(s) = report.mean(v) {
            println!(
                "{label}{v}: acc={:.4} nmi={:.4} ari={:.4} f1={:.4}",
                s.acc, s.nmi, s.ari, s.f1
            );
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = build_config(&c, false)?;
            let DatasetSource::Lfr(spec) = &cfg.source else {
                return Err(Failure::Usage("generate needs an lfr.* configuration".into()));
            };
            let dirs = cmd_generate(&spec.with_seed(cfg.train.seed), cfg.replicas, &cfg.out_dir)?;
            println!("wrote {} networks to {}", dirs.len(), cfg.out_dir.display());
            Ok(())
        }
        Command::Train(c) => {
            let cfg = build_config(&c, false)?;
            let report = cmd_train(&cfg)?;
            print_means("", &report);
            for o in &report.outcomes {
                if let Err(e) = &o.result {
                    eprintln!("seed {} failed: {e}", o.seed);
                }
            }
            match report.failures() {
                0 => Ok(()),
                n => Err(Failure::Run(format!("{n} of {} replicas failed", cfg.replicas))),
            }
        }
        Command::GridSearch(c) => {
            let cfg = build_config(&c, true)?;
            let w = cfg.train.weights;
            let or = |v: &Vec<f64>, d: f64| if v.is_empty() { vec![d] } else { v.clone() };
            let report = cmd_grid_search(&cfg, &or(&c.alpha, w.alpha), &or(&c.beta, w.beta), &or(&c.gamma, w.gamma))?;
            for cell in &report.cells {
                let w = cell.weights;
                match cell.mean_qg {
                    Some(s) => println!(
                        "alpha={} beta={} gamma={}: acc={:.4} nmi={:.4} failures={}",
                        w.alpha, w.beta, w.gamma, s.acc, s.nmi, cell.failures
                    ),
                    None => println!("alpha={} beta={} gamma={}: all replicas failed", w.alpha, w.beta, w.gamma),
                }
            }
            match report.best {
                Some(b) => {
                    let w = report.cells[b].weights;
                    println!("best: alpha={} beta={} gamma={}", w.alpha, w.beta, w.gamma);
                    Ok(())
                }
                None => Err(Failure::Run("every grid cell failed".into())),
            }
        }
        Command::Ablate(c) => {
            let cfg = build_config(&c, false)?;
            let report = cmd_ablate(&cfg)?;
            for arm in ABLATION_ARMS {
                match report.mean_acc(arm) {
                    Some(a) => println!("{arm}: mean acc={a:.4}"),
                    None => println!("{arm}: no successful runs"),
                }
            }
            let failed = report.rows.iter().filter(|r| r.scores.is_none()).count();
            match failed {
                0 => Ok(()),
                n => Err(Failure::Run(format!("{n} ablation rows failed"))),
            }
        }
        Command::Eval { labels, predictions } => {
            let s = cmd_eval(&labels, &predictions)?;
            println!("acc,nmi,ari,f1");
            println!("{},{},{},{}", s.acc, s.nmi, s.ari, s.f1);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
