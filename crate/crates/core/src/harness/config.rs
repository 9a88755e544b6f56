//! `key = value` experiment configuration.
//!
//! Lines starting with `#` and blank lines are ignored. Keys:
//!
//! | key | meaning | default |
//! |-----|---------|---------|
//! | `lfr.mu`, `lfr.noise` | synthetic LFR source (either key selects it) | `0.6`, `0.1` |
//! | `lfr.n`, `lfr.avg_degree`, `lfr.max_degree`, `lfr.min_cluster`, `lfr.max_cluster`, `lfr.degree_exponent`, `lfr.size_exponent`, `lfr.attr_dim`, `lfr.attrs_per_cluster` | generator overrides | benchmark row for `lfr.mu` |
//! | `data.dir` | directory with `edges.txt`, `attrs.txt`, `labels.txt` | |
//! | `data.edges`, `data.attrs`, `data.labels` | explicit graph files | |
//! | `features`, `features.labels` | attribute-only data turned into a kNN graph | |
//! | `knn.k`, `knn.metric` | kNN graph for `features` | `10`, `euclidean` |
//! | `clusters` | K | number of ground-truth classes |
//! | `ae.hidden` | comma-separated hidden widths | by data source |
//! | `embedding_dim` | AE embedding width | `64` |
//! | `gae.hidden`, `gae.output` | GCN widths | `256`, `64` |
//! | `pretrain_epochs`, `kmeans_restarts`, `max_iter`, `lr` | training | `50`, `20`, `200`, `0.001` |
//! | `alpha`, `beta`, `gamma` | loss weights | pinned defaults |
//! | `seed`, `replicas`, `out`, `threads` | orchestration | `0`, `1`, `out`, `1` |
//! | `track_metrics` | per-epoch scores in `history.csv` | `true` |

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::dec::{AeConfig, GaeConfig, LossWeights, TrainConfig};
use crate::error::{Error, Result};
use crate::graph::KnnMetric;
use crate::lfr::LfrSpec;

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// A fresh LFR network per replica, seeded like the replica.
    Lfr(LfrSpec),
    Files {
        edges: PathBuf,
        attrs: PathBuf,
        labels: Option<PathBuf>,
    },
    /// Attributes without a graph; edges come from a kNN graph.
    Features {
        attrs: PathBuf,
        labels: Option<PathBuf>,
        k: usize,
        metric: KnnMetric,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: DatasetSource,
    pub clusters: Option<usize>,
    /// Hidden AE widths; `None` picks them from the data source.
    pub ae_hidden: Option<Vec<usize>>,
    pub embedding_dim: usize,
    pub gae: GaeConfig,
    pub train: TrainConfig,
    pub replicas: usize,
    pub out_dir: PathBuf,
    pub threads: usize,
    pub track_metrics: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: DatasetSource::Lfr(LfrSpec::benchmark(0.6, 0.1, 0)),
            clusters: None,
            ae_hidden: None,
            embedding_dim: 64,
            gae: GaeConfig {
                hidden_dim: 256,
                output_dim: 64,
            },
            train: TrainConfig::default(),
            replicas: 1,
            out_dir: PathBuf::from("out"),
            threads: 1,
            track_metrics: true,
        }
    }
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Parameter(format!("bad value `{value}` for `{key}`")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value
        .split(',')
        .map(|t| parse_value(key, t.trim()))
        .collect()
}

/// Parses `key = value` lines into an ordered map, rejecting duplicates.
pub fn parse_kv(text: &str, path: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            msg: "expected `key = value`".into(),
        })?;
        let key = k.trim().to_string();
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("duplicate key `{key}`"),
            });
        }
    }
    Ok(map)
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_kv(&parse_kv(&text, path)?)
    }

    pub fn from_str_named(text: &str, name: &Path) -> Result<Self> {
        Self::from_kv(&parse_kv(text, name)?)
    }

    pub fn from_kv(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = Self::default();
        let get = |k: &str| map.get(k).map(String::as_str);

        let lfr_keys = map.keys().any(|k| k.starts_with("lfr."));
        let file_keys = ["data.dir", "data.edges", "data.attrs"]
            .iter()
            .any(|k| map.contains_key(*k));
        let feature_keys = map.contains_key("features");
        let sources = [lfr_keys, file_keys, feature_keys].iter().filter(|&&b| b).count();
        if sources > 1 {
            return Err(Error::Parameter(
                "config names more than one dataset source (lfr.*, data.*, features)".into(),
            ));
        }

        if file_keys {
            let (edges, attrs, labels) = if let Some(dir) = get("data.dir") {
                if map.contains_key("data.edges") || map.contains_key("data.attrs") {
                    return Err(Error::Parameter("use either data.dir or data.edges/data.attrs".into()));
                }
                let dir = PathBuf::from(dir);
                let labels = dir.join(crate::io::LABEL_FILE);
                (
                    dir.join(crate::io::EDGE_FILE),
                    dir.join(crate::io::ATTR_FILE),
                    labels.exists().then_some(labels),
                )
            } else {
                let need = |k: &str| {
                    get(k)
                        .map(PathBuf::from)
                        .ok_or_else(|| Error::Parameter(format!("missing `{k}`")))
                };
                (need("data.edges")?, need("data.attrs")?, get("data.labels").map(PathBuf::from))
            };
            cfg.source = DatasetSource::Files { edges, attrs, labels };
        } else if feature_keys {
            cfg.source = DatasetSource::Features {
                attrs: PathBuf::from(get("features").unwrap()),
                labels: get("features.labels").map(PathBuf::from),
                k: get("knn.k").map_or(Ok(10), |v| parse_value("knn.k", v))?,
                metric: get("knn.metric").map_or(Ok(KnnMetric::Euclidean), |v| v.parse())?,
            };
        } else {
            let mu = get("lfr.mu").map_or(Ok(0.6), |v| parse_value("lfr.mu", v))?;
            let noise = get("lfr.noise").map_or(Ok(0.1), |v| parse_value("lfr.noise", v))?;
            let mut spec = LfrSpec::benchmark(mu, noise, 0);
            macro_rules! lfr_field {
                ($key:literal, $field:ident) => {
                    if let Some(v) = get($key) {
                        spec.$field = parse_value($key, v)?;
                    }
                };
            }
            lfr_field!("lfr.n", n);
            lfr_field!("lfr.avg_degree", avg_degree);
            lfr_field!("lfr.max_degree", max_degree);
            lfr_field!("lfr.min_cluster", min_cluster);
            lfr_field!("lfr.max_cluster", max_cluster);
            lfr_field!("lfr.degree_exponent", degree_exponent);
            lfr_field!("lfr.size_exponent", size_exponent);
            lfr_field!("lfr.attr_dim", attr_dim);
            lfr_field!("lfr.attrs_per_cluster", attrs_per_cluster);
            spec.validate()?;
            cfg.source = DatasetSource::Lfr(spec);
        }

        for (key, value) in map {
            let key = key.as_str();
            match key {
                "lfr.mu" | "lfr.noise" | "lfr.n" | "lfr.avg_degree" | "lfr.max_degree" | "lfr.min_cluster"
                | "lfr.max_cluster" | "lfr.degree_exponent" | "lfr.size_exponent" | "lfr.attr_dim"
                | "lfr.attrs_per_cluster" => {}
                "data.dir" | "data.edges" | "data.attrs" | "data.labels" | "features"
                | "features.labels" | "knn.k" | "knn.metric" => {}
                "clusters" => cfg.clusters = Some(parse_value(key, value)?),
                "ae.hidden" => cfg.ae_hidden = Some(parse_list(key, value)?),
                "embedding_dim" => cfg.embedding_dim = parse_value(key, value)?,
                "gae.hidden" => cfg.gae.hidden_dim = parse_value(key, value)?,
                "gae.output" => cfg.gae.output_dim = parse_value(key, value)?,
                "pretrain_epochs" => cfg.train.pretrain_epochs = parse_value(key, value)?,
                "kmeans_restarts" => cfg.train.kmeans_restarts = parse_value(key, value)?,
                "max_iter" => cfg.train.max_iter = parse_value(key, value)?,
                "lr" => cfg.train.lr = parse_value(key, value)?,
                "alpha" => cfg.train.weights.alpha = parse_value(key, value)?,
                "beta" => cfg.train.weights.beta = parse_value(key, value)?,
                "gamma" => cfg.train.weights.gamma = parse_value(key, value)?,
                "seed" => cfg.train.seed = parse_value(key, value)?,
                "replicas" => cfg.replicas = parse_value(key, value)?,
                "out" => cfg.out_dir = PathBuf::from(value),
                "threads" => cfg.threads = parse_value(key, value)?,
                "track_metrics" => cfg.track_metrics = parse_value(key, value)?,
                other => return Err(Error::Parameter(format!("unknown config key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicas == 0 {
            return Err(Error::Parameter("replicas must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Parameter("threads must be at least 1".into()));
        }
        if self.embedding_dim == 0 {
            return Err(Error::Parameter("embedding_dim must be positive".into()));
        }
        if let Some(k) = self.clusters {
            if k < 2 {
                return Err(Error::Parameter(format!("clusters = {k}, need at least 2")));
            }
        }
        if let Some(h) = &self.ae_hidden {
            if h.is_empty() || h.contains(&0) {
                return Err(Error::Parameter(format!("bad ae.hidden {h:?}")));
            }
        }
        GaeConfig::new(self.gae.hidden_dim, self.gae.output_dim)?;
        if let DatasetSource::Lfr(spec) = &self.source {
            spec.validate()?;
        }
        self.train.validate()
    }

    /// Autoencoder for attributes of width `m`.
    pub fn ae_config(&self, m: usize, binary: bool) -> Result<AeConfig> {
        let d = self.embedding_dim;
        let hidden = match (&self.ae_hidden, &self.source) {
            (Some(h), _) => h.clone(),
            (None, DatasetSource::Lfr(spec)) => {
                return AeConfig::for_attributes(m, d, spec.noise_ratio, binary);
            }
            (None, DatasetSource::Files { .. }) => vec![256],
            (None, DatasetSource::Features { .. }) => vec![1024, 512, 512, 256],
        };
        let mut dims = vec![m];
        dims.extend(hidden);
        dims.push(d);
        AeConfig::new(dims, binary)
    }

    pub fn with_weights(&self, w: LossWeights) -> Self {
        let mut c = self.clone();
        c.train.weights = w;
        c
    }

    /// Canonical `key=value` listing of everything that affects results.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        match &self.source {
            DatasetSource::Lfr(spec) => {
                for line in spec.to_kv().lines().filter(|l| !l.starts_with("seed=")) {
                    let _ = writeln!(s, "lfr.{line}");
                }
            }
            DatasetSource::Files { edges, attrs, labels } => {
                let _ = writeln!(s, "data.edges={}", edges.display());
                let _ = writeln!(s, "data.attrs={}", attrs.display());
                if let Some(l) = labels {
                    let _ = writeln!(s, "data.labels={}", l.display());
                }
            }
            DatasetSource::Features { attrs, labels, k, metric } => {
                let _ = writeln!(s, "features={}", attrs.display());
                if let Some(l) = labels {
                    let _ = writeln!(s, "features.labels={}", l.display());
                }
                let _ = writeln!(s, "knn.k={k}\nknn.metric={metric}");
            }
        }
        if let Some(k) = self.clusters {
            let _ = writeln!(s, "clusters={k}");
        }
        if let Some(h) = &self.ae_hidden {
            let h: Vec<String> = h.iter().map(ToString::to_string).collect();
            let _ = writeln!(s, "ae.hidden={}", h.join(","));
        }
        let t = &self.train;
        let _ = write!(
            s,
            "embedding_dim={}\ngae.hidden={}\ngae.output={}\npretrain_epochs={}\nkmeans_restarts={}\nmax_iter={}\nlr={}\nalpha={}\nbeta={}\ngamma={}\n",
            self.embedding_dim,
            self.gae.hidden_dim,
            self.gae.output_dim,
            t.pretrain_epochs,
            t.kmeans_restarts,
            t.max_iter,
            t.lr,
            t.weights.alpha,
            t.weights.beta,
            t.weights.gamma
        );
        s
    }

    /// 64-bit FNV-1a of [`Self::canonical`], as 16 hex digits.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.canonical().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}
