use std::fs;
use std::path::Path;
use std::process::{Command, Output};

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
pretrain_epochs = 5
kmeans_restarts = 2
max_iter = 5
";

fn dcpdec(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dcpdec"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn setup() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("small.cfg");
    fs::write(&cfg, SMALL).unwrap();
    let cfg = cfg.to_str().unwrap().to_string();
    (dir, cfg)
}

fn out_arg(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(str::to_string).collect()
}

#[test]
fn eval_scores_prediction_files() {
    let dir = tempfile::tempdir().unwrap();
    let truth = dir.path().join("truth.txt");
    let pred = dir.path().join("pred.txt");
    fs::write(&truth, "0\n1\n1\n1\n").unwrap();
    fs::write(&pred, "0\n0\n1\n1\n").unwrap();
    let o = dcpdec(&["eval", truth.to_str().unwrap(), pred.to_str().unwrap()]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("acc,nmi,ari,f1"));
    let acc: f64 = lines.next().unwrap().split(',').next().unwrap().parse().unwrap();
    assert_eq!(acc, 0.75);

    let o = dcpdec(&["eval", truth.to_str().unwrap(), truth.to_str().unwrap()]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().nth(1), Some("1,1,1,1"));

    fs::write(&pred, "0\n0\n1\n").unwrap();
    let o = dcpdec(&["eval", truth.to_str().unwrap(), pred.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let missing = dir.path().join("nope.txt");
    let o = dcpdec(&["eval", truth.to_str().unwrap(), missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("nope.txt"));
}

#[test]
fn usage_errors_exit_with_two() {
    let (dir, cfg) = setup();
    assert_eq!(dcpdec(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(dcpdec(&["train", "--seed", "x"]).status.code(), Some(2));
    let out = out_arg(dir.path(), "o");
    let o = dcpdec(&["train", "--config", &cfg, "--out", &out, "--alpha", "0.1,0.2"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dcpdec(&["train", "--config", &cfg, "--out", &out, "--k", "5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!dir.path().join("o").join("results.csv").exists());
}

#[test]
fn bad_config_fails_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "max_iter = 3\nno_such_key = 1\n").unwrap();
    let o = dcpdec(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("no_such_key"));

    fs::write(&cfg, "max_iter = 3\nthis line is wrong\n").unwrap();
    let o = dcpdec(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().contains("bad.cfg:2:"));
}

#[test]
fn train_is_deterministic_and_appends() {
    let (dir, cfg) = setup();
    let a = out_arg(dir.path(), "a");
    let b = out_arg(dir.path(), "b");
    for out in [&a, &b] {
        let o = dcpdec(&["train", "--config", &cfg, "--out", out, "--replicas", "2", "--seed", "4"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let strip = |lines: Vec<String>| -> Vec<String> {
        lines
            .into_iter()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f[8] = "";
                f.join(",")
            })
            .collect()
    };
    let ra = strip(data_lines(&Path::new(&a).join("results.csv")));
    let rb = strip(data_lines(&Path::new(&b).join("results.csv")));
    assert_eq!(ra.len(), 8);
    assert_eq!(ra, rb);
    assert_eq!(
        fs::read(Path::new(&a).join("history.csv")).unwrap(),
        fs::read(Path::new(&b).join("history.csv")).unwrap()
    );
    assert!(ra[0].split(',').nth(1) == Some("4") && ra[4].split(',').nth(1) == Some("5"));

    let o = dcpdec(&["train", "--config", &cfg, "--out", &a, "--gamma", "0.5"]);
    assert!(o.status.success());
    let lines = data_lines(&Path::new(&a).join("results.csv"));
    assert_eq!(lines.len(), 12);
    assert_ne!(lines[0].split(',').next(), lines[8].split(',').next());
}

#[test]
fn grid_search_writes_every_cell() {
    let (dir, cfg) = setup();
    let out = out_arg(dir.path(), "g");
    let o = dcpdec(&[
        "grid-search", "--config", &cfg, "--out", &out, "--replicas", "2", "--alpha", "0,1", "--beta", "0.5",
        "--gamma", "0,0.5,1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_lines(&Path::new(&out).join("grid.csv")).len(), 2 * 3 * 2);
    assert!(String::from_utf8(o.stdout).unwrap().contains("best: "));

    let o = dcpdec(&["grid-search", "--config", &cfg, "--out", &out, "--alpha", "2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn ablate_writes_three_arms_per_seed() {
    let (dir, cfg) = setup();
    let out = out_arg(dir.path(), "ab");
    let o = dcpdec(&["ablate", "--config", &cfg, "--out", &out, "--replicas", "2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = data_lines(&Path::new(&out).join("ablation.csv"));
    assert_eq!(lines.len(), 6);
    let arms: Vec<&str> = lines.iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(arms, ["DCP-DEC", "DCP-W/G", "DCP-W/A", "DCP-DEC", "DCP-W/G", "DCP-W/A"]);
}

#[test]
fn generate_then_train_on_files() {
    let (dir, cfg) = setup();
    let nets = out_arg(dir.path(), "nets");
    for _ in 0..2 {
        let o = dcpdec(&["generate", "--config", &cfg, "--out", &nets, "--replicas", "2"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let manifest = fs::read_to_string(Path::new(&nets).join("manifest.txt")).unwrap();
    assert_eq!(manifest, "replica_00\nreplica_01\n");

    let files_cfg = dir.path().join("files.cfg");
    let body: String = SMALL.lines().filter(|l| !l.starts_with("lfr.")).collect::<Vec<_>>().join("\n");
    fs::write(
        &files_cfg,
        format!("{body}\ndata.dir = {}\n", Path::new(&nets).join("replica_01").display()),
    )
    .unwrap();
    let out = out_arg(dir.path(), "t");
    let o = dcpdec(&["train", "--config", files_cfg.to_str().unwrap(), "--out", &out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_lines(&Path::new(&out).join("results.csv")).len(), 4);
}

#[test]
fn features_source_accepts_knn_flags() {
    let dir = tempfile::tempdir().unwrap();
    let attrs = dir.path().join("x.txt");
    let labels = dir.path().join("y.txt");
    let mut x = String::new();
    let mut y = String::new();
    for i in 0..30 {
        let c = i % 3;
        let row: Vec<String> = (0..6)
            .map(|j| if j / 2 == c { format!("{}", 1.0 + 0.01 * i as f64) } else { "0".into() })
            .collect();
        x.push_str(&row.join(" "));
        x.push('\n');
        y.push_str(&format!("{c}\n"));
    }
    fs::write(&attrs, x).unwrap();
    fs::write(&labels, y).unwrap();
    let cfg = dir.path().join("f.cfg");
    fs::write(
        &cfg,
        format!(
            "features = {}\nfeatures.labels = {}\nae.hidden = 8\nembedding_dim = 4\ngae.hidden = 8\ngae.output = 4\n\
             pretrain_epochs = 3\nkmeans_restarts = 2\nmax_iter = 3\n",
            attrs.display(),
            labels.display()
        ),
    )
    .unwrap();
    let out = out_arg(dir.path(), "o");
    let o = dcpdec(&[
        "train", "--config", cfg.to_str().unwrap(), "--out", &out, "--k", "4", "--metric", "cosine",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_lines(&Path::new(&out).join("results.csv")).len(), 4);
}
