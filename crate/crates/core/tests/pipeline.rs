use std::fs;
use std::path::Path;

use dcpdec::dec::{load_checkpoint, ParamBlocks, Variant};
use dcpdec::harness::output::{ABLATION_HEADER, GRID_HEADER, HISTORY_HEADER, RESULTS_HEADER};
use dcpdec::harness::{
    cmd_ablate, cmd_generate, cmd_grid_search, cmd_train, load_dataset, run_on_network, DatasetSource,
    ExperimentConfig, ABLATION_ARMS,
};
use dcpdec::io::{load_network_dir, save_network};
use dcpdec::lfr::generate;

const SMALL: &str = "
lfr.n = 150
lfr.mu = 0.3
lfr.noise = 0.1
lfr.avg_degree = 8
lfr.max_degree = 16
lfr.min_cluster = 20
lfr.max_cluster = 40
lfr.attr_dim = 40
lfr.attrs_per_cluster = 5
ae.hidden = 16
embedding_dim = 8
gae.hidden = 16
gae.output = 8
pretrain_epochs = 10
kmeans_restarts = 2
max_iter = 8
";

fn small_config(out: &Path, replicas: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::from_str_named(SMALL, Path::new("small.cfg")).unwrap();
    cfg.out_dir = out.to_path_buf();
    cfg.replicas = replicas;
    cfg
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<csv::StringRecord>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(str::to_string).collect();
    let rows = r.records().map(Result::unwrap).collect();
    (header, rows)
}

fn params(state: &dcpdec::dec::ModelState) -> Vec<u64> {
    let mut s = state.clone();
    s.param_slices_mut(ParamBlocks::All)
        .iter()
        .flat_map(|p| p.iter().map(|v| v.to_bits()))
        .collect()
}

#[test]
fn saved_benchmark_network_reloads_identically() {
    let cfg = ExperimentConfig::default();
    let DatasetSource::Lfr(spec) = &cfg.source else { unreachable!() };
    let net = generate(&spec.with_seed(3)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_network(&net, dir.path()).unwrap();
    let back = load_network_dir(dir.path()).unwrap();
    assert_eq!(back.adjacency(), net.adjacency());
    assert_eq!(back.attributes(), net.attributes());
    assert_eq!(back.labels(), net.labels());
}

#[test]
fn training_on_a_reloaded_network_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1);
    let net = load_dataset(&cfg, 0).unwrap();
    save_network(&net, &dir.path().join("net")).unwrap();
    let back = load_network_dir(&dir.path().join("net")).unwrap();
    let a = run_on_network(&cfg, &net, 11).unwrap();
    let b = run_on_network(&cfg, &back, 11).unwrap();
    assert_eq!(params(&a.state), params(&b.state));
    assert_eq!(a.history, b.history);
    assert_eq!(a.scores, b.scores);
}

#[test]
fn train_appends_results_history_and_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 2);
    let report = cmd_train(&cfg).unwrap();
    assert_eq!(report.failures(), 0);
    assert_eq!(report.rows.len(), 8);

    let (header, rows) = read_csv(&dir.path().join("results.csv"));
    assert_eq!(header, RESULTS_HEADER);
    assert_eq!(rows.len(), 8);
    let variants: Vec<&str> = rows.iter().take(4).map(|r| &r[2]).collect();
    assert_eq!(variants, Variant::ALL.map(|v| v.name()));
    for r in &rows {
        assert_eq!(&r[3], "ok");
        let acc: f64 = r[4].parse().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }

    let (header, rows) = read_csv(&dir.path().join("history.csv"));
    assert_eq!(header, HISTORY_HEADER);
    assert_eq!(rows.len(), 2 * 8);

    // The checkpoint holds exactly the trained parameters.
    let o = &report.outcomes[1];
    let path = dir
        .path()
        .join("checkpoints")
        .join(format!("{}_seed{}.ckpt", cfg.hash(), o.seed));
    let restored = load_checkpoint(&path).unwrap();
    assert_eq!(params(&restored), params(&o.result.as_ref().unwrap().state));

    // A second run appends under the same header.
    cmd_train(&cfg).unwrap();
    let (_, rows) = read_csv(&dir.path().join("results.csv"));
    assert_eq!(rows.len(), 16);
    let without_time = |r: &csv::StringRecord| -> Vec<String> {
        r.iter().enumerate().filter(|&(i, _)| i != 8).map(|(_, f)| f.to_string()).collect()
    };
    assert_eq!(without_time(&rows[0]), without_time(&rows[8]));
}

#[test]
fn grid_search_writes_one_row_per_cell_and_replica() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 2);
    let report = cmd_grid_search(&cfg, &[0.0, 0.5], &[0.1], &[0.0, 1.0]).unwrap();
    assert_eq!(report.cells.len(), 4);
    let best = report.best.unwrap();
    let best_acc = report.cells[best].mean_qg.unwrap().acc;
    assert!(report.cells.iter().all(|c| c.mean_qg.unwrap().acc <= best_acc));

    let (header, rows) = read_csv(&dir.path().join("grid.csv"));
    assert_eq!(header, GRID_HEADER);
    assert_eq!(rows.len(), 4 * 2);
    assert!(cmd_grid_search(&cfg, &[1.5], &[0.1], &[0.1]).is_err());
    assert!(cmd_grid_search(&cfg, &[], &[0.1], &[0.1]).is_err());
}

#[test]
fn ablation_writes_three_arms_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 2);
    let report = cmd_ablate(&cfg).unwrap();
    let (header, rows) = read_csv(&dir.path().join("ablation.csv"));
    assert_eq!(header, ABLATION_HEADER);
    assert_eq!(rows.len(), 6);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(&r[1], ABLATION_ARMS[i % 3]);
        assert_eq!(&r[2], "ok");
    }
    // Both gamma = 0 arms come from the same run.
    assert_eq!(rows[1][0], rows[2][0]);
    for arm in ABLATION_ARMS {
        assert!(report.mean_acc(arm).is_some());
    }
}

#[test]
fn generate_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), 1);
    let DatasetSource::Lfr(spec) = &cfg.source else { unreachable!() };
    let first = cmd_generate(spec, 2, dir.path()).unwrap();
    let snapshot: Vec<Vec<u8>> = first
        .iter()
        .flat_map(|d| ["edges.txt", "attrs.txt", "labels.txt", "spec.txt"].map(|f| d.join(f)))
        .map(|p| fs::read(p).unwrap())
        .collect();
    let second = cmd_generate(spec, 2, dir.path()).unwrap();
    assert_eq!(first, second);
    let again: Vec<Vec<u8>> = second
        .iter()
        .flat_map(|d| ["edges.txt", "attrs.txt", "labels.txt", "spec.txt"].map(|f| d.join(f)))
        .map(|p| fs::read(p).unwrap())
        .collect();
    assert_eq!(snapshot, again);
    assert_eq!(
        fs::read_to_string(dir.path().join("manifest.txt")).unwrap(),
        "replica_00\nreplica_01\n"
    );
    let spec_txt = fs::read_to_string(first[1].join("spec.txt")).unwrap();
    assert!(spec_txt.contains("\nseed=1\n"), "{spec_txt}");
    assert!(spec_txt.contains("realized_mu"));
}
