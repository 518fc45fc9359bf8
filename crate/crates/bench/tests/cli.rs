use std::path::PathBuf;
use std::process::{Command, Output};

use cagraph_bench::report::parse_csv_report;
use cagraph_bench::{load_csv, LabelMode};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cagraph")).args(args).output().unwrap()
}

fn iris() -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data/iris.csv")
        .to_string_lossy()
        .into_owned()
}

#[test]
fn synth_then_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("blobs.csv");
    let data_s = data.to_str().unwrap();
    let out = run(&["synth", "--per-cluster", "10,10", "--dim", "3", "--noise", "0", "--seed", "4", "--out", data_s]);
    assert!(out.status.success());
    let ds = load_csv(&data, &LabelMode::LastColumn, false).unwrap();
    assert_eq!((ds.n(), ds.d()), (20, 3));

    let out = run(&["cluster", "--data", data_s, "--method", "kmeans"]);
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("acc=1.000000"), "{stdout}");
}

#[test]
fn cluster_without_labels_prints_assignment() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("x.csv");
    std::fs::write(&data, "0,0\n0,0.1\n5,5\n5,5.1\n").unwrap();
    let out = run(&["cluster", "--data", data.to_str().unwrap(), "--labels", "none", "--clusters", "2", "--method", "symnmf", "--p", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let labels = stdout.lines().find_map(|l| l.strip_prefix("labels=")).unwrap();
    let l: Vec<&str> = labels.split(',').collect();
    assert_eq!(l.len(), 4);
    assert!(l[0] == l[1] && l[2] == l[3] && l[0] != l[2]);
}

#[test]
fn bench_emits_table_and_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.csv");
    let out = run(&[
        "bench", "--data", &iris(), "--methods", "kmeans,symnmf", "--trials", "3", "--out",
        report.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let recs = parse_csv_report(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(recs.len(), 8);
    assert!(recs.iter().all(|r| r.dataset == "iris" && r.trials == 3));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("symnmf vs kmeans (acc): "), "{stdout}");
}

#[test]
fn grid_json_to_stdout() {
    let out = run(&[
        "grid", "--data", &iris(), "--alphas", "0.01", "--betas", "0.1,1", "--trials", "1", "--max-iter", "50",
        "--format", "json",
    ]);
    assert!(out.status.success());
    let recs: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(recs.len(), 8);
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("best alpha=0.01"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["cluster"]).status.code(), Some(1));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["cluster", "--data", "/no/such/file.csv"]).status.code(), Some(2));
    assert_eq!(run(&["cluster", "--data", &iris(), "--clusters", "1"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let ragged = dir.path().join("bad.csv");
    std::fs::write(&ragged, "1,2,a\n3,b\n").unwrap();
    let out = run(&["cluster", "--data", ragged.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 2"));

    let out = run(&["cluster", "--data", &iris(), "--alpha", "1e308"]);
    assert_eq!(out.status.code(), Some(3));
}
