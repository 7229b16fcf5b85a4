mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn topounet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topounet"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir)
        .map(|d| {
            d.map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
                .collect()
        })
        .unwrap_or_default();
    v.sort();
    v
}

fn write_config(dir: &Path, config: &topounet_cli::ExperimentConfig) -> String {
    let p = dir.join("config.json");
    fs::write(&p, serde_json::to_string_pretty(config).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn build_grid_prints_counts_and_writes_complex() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = topounet(&["build", "--grid", "28x28", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "n0=784 n1=1512 n2=729\n");
    let files = files_in(dir.path());
    assert_eq!(files.len(), 1);
    assert!(files[0].starts_with("complex-") && files[0].ends_with(".json"));

    let complex = dir.path().join(&files[0]);
    let a = topounet(&[
        "analyze",
        "--complex",
        complex.to_str().unwrap(),
        "--path",
        "0-1-2",
        "--d0",
        "16",
        "--format",
        "json",
    ]);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    let v: serde_json::Value = serde_json::from_str(&stdout(&a)).unwrap();
    assert_eq!(v["rho_bot_exact"], "729/784");
    assert!((v["rho_bot"].as_f64().unwrap() - 729.0 / 784.0).abs() < 1e-12);
    assert_eq!(v["min_bottleneck_width"], 18);
}

#[test]
fn edgeless_graph_and_global_cell() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("empty.tsv");
    fs::write(&edges, "").unwrap();
    let out = dir.path().join("out");
    let args = [
        "build",
        "--graph",
        edges.to_str().unwrap(),
        "--num-nodes",
        "5",
        "--out",
        out.to_str().unwrap(),
    ];
    let o = topounet(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o), "n0=5 n1=0\n");

    let mut with_global = args.to_vec();
    with_global.push("--with-global");
    with_global.push("--force");
    let o = topounet(&with_global);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("global"), "{}", stderr(&o));
}

#[test]
fn malformed_edge_line_is_reported_with_its_number() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("bad.tsv");
    fs::write(&edges, "0\t1\n1\t2\n2\tx\n").unwrap();
    let out = dir.path().join("out");
    let o = topounet(&[
        "build",
        "--graph",
        edges.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("bad.tsv:3"), "{}", stderr(&o));
    assert!(files_in(&out).is_empty());
}

#[test]
fn two_sources_and_unknown_config_keys_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = topounet(&["build", "--grid", "3x3", "--points", "p.xyz"]);
    assert_eq!(o.status.code(), Some(2));

    let mut v = serde_json::to_value(common::toy_grid_config(1)).unwrap();
    v["training"]["learning_rate"] = 0.1.into();
    let p = dir.path().join("config.json");
    fs::write(&p, v.to_string()).unwrap();
    let o = topounet(&[
        "train",
        "--config",
        p.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("learning_rate"), "{}", stderr(&o));

    let o = topounet(&["train"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_dataset_is_a_data_error_without_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = common::rings_config(1, vec![0]);
    config.data = topounet_cli::DataSpec::Graph {
        edges: "missing.tsv".into(),
        features: None,
        labels: None,
        lift: Default::default(),
    };
    let p = write_config(dir.path(), &config);
    let out = dir.path().join("out");
    let o = topounet(&["train", "--config", &p, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("missing.tsv"));
    assert!(files_in(&out).is_empty());
}

#[test]
fn train_is_deterministic_and_refuses_overwrite() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), &common::toy_grid_config(10));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let run = |out: &Path, extra: &[&str]| {
        let mut args = vec![
            "train",
            "--config",
            &p,
            "--out",
            out.to_str().unwrap(),
            "--format",
            "json",
        ];
        args.extend_from_slice(extra);
        topounet(&args)
    };
    let first = run(&a, &[]);
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let second = run(&b, &["--threads", "2"]);
    assert_eq!(stdout(&first), stdout(&second));

    let files = files_in(&a);
    assert_eq!(files, files_in(&b));
    assert_eq!(files.len(), 2);
    let strip_time = |dir: &Path, f: &str| -> Vec<String> {
        let text = fs::read_to_string(dir.join(f)).unwrap();
        text.lines()
            .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
            .collect()
    };
    let csv = files.iter().find(|f| f.ends_with(".csv")).unwrap();
    assert_eq!(strip_time(&a, csv), strip_time(&b, csv));

    let again = run(&a, &[]);
    assert_eq!(again.status.code(), Some(2));
    assert!(stderr(&again).contains("--force"));
    assert_eq!(run(&a, &["--force"]).status.code(), Some(0));
}

#[test]
fn seed_flag_changes_the_hash() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), &common::toy_grid_config(2));
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        topounet(&["train", "--config", &p, "--out", out, "--seed", "5"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        topounet(&["train", "--config", &p, "--out", out, "--seed", "6"])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        files_in(dir.path()).iter().filter(|f| f.starts_with("train-")).count(),
        4
    );
}

#[test]
fn ablate_without_variants_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(dir.path(), &common::toy_grid_config(1));
    let o = topounet(&["ablate", "--config", &p, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_every_check() {
    let o = topounet(&["verify", "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let checks: Vec<serde_json::Value> = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(checks.len() >= 8);
    assert!(checks.iter().all(|c| c["passed"] == true));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let p = entry.unwrap().path();
        topounet_cli::ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        n += 1;
    }
    assert!(n >= 2);
}
