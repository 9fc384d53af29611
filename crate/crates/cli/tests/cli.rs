use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fluidtree(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fluidtree")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = fluidtree(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn network_writes_spec_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("cc.json");
    ok(&["network", "--make", "crisscross", "--out", p(&spec)]);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&spec).unwrap()).unwrap();
    assert_eq!(v["n"], 3);
    assert_eq!(v["m"], 2);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("cc.json.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "network");
    assert_eq!(manifest["outputs"].as_object().unwrap().len(), 1);
}

#[test]
fn runtime_errors_exit_1_and_usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let out = fluidtree(&["solve", "--spec", p(&missing), "--x0", "1,1,1", "--out", p(&dir.path().join("s.json"))]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!String::from_utf8_lossy(&out.stderr).is_empty());
    assert_eq!(fluidtree(&["solve", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(fluidtree(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn help_lists_defaults() {
    for (cmd, needle) in [
        ("network", "[default: 3]"),
        ("solve", "[default: 400]"),
        ("generate", "[default: 1000]"),
        ("train", "[default: 3,5,10]"),
        ("evaluate", "[default: 20]"),
        ("simulate", "[default: auto]"),
        ("export-tree", "[default: text]"),
        ("bench", "[default: 20]"),
    ] {
        let out = ok(&[cmd, "--help"]);
        let text = String::from_utf8_lossy(&out.stdout);
        assert!(text.contains(needle), "{cmd} --help lacks {needle}:\n{text}");
    }
}

fn pipeline(root: &Path) {
    let spec = root.join("cc.json");
    let data = root.join("data");
    let test = root.join("test");
    let model = root.join("model");
    ok(&["network", "--make", "crisscross", "--out", p(&spec)]);
    let grid = ["--intervals", "100"];
    let gen = |out: &Path, m: &str, seed: &str, extra: &[&str]| {
        let mut args = vec!["generate", "--spec", p(&spec), "--M", m, "--seed", seed, "--out", p(out)];
        args.extend_from_slice(&grid);
        args.extend_from_slice(extra);
        ok(&args);
    };
    gen(&data, "60", "1", &["--alphas", "0.5,1.5"]);
    gen(&test, "20", "2", &["--alphas", "5", "--scaled-only"]);
    ok(&["train", "--data", p(&data), "--max-depth", "3", "--seed", "7", "--out", p(&model)]);
    let report = root.join("report.json");
    let mut args = vec![
        "evaluate", "--spec", p(&spec), "--model", p(&model), "--test", p(&test),
        "--cost-samples", "2", "--timing-samples", "2", "--report", p(&report),
    ];
    args.extend_from_slice(&grid);
    ok(&args);
    let traj = root.join("traj.csv");
    ok(&["simulate", "--spec", p(&spec), "--model", p(&model), "--x0", "1,1,0.1", "--out", p(&traj)]);
    ok(&["export-tree", "--model", p(&model), "--format", "dot", "--out", p(&root.join("tree.dot"))]);
}

#[test]
fn pipeline_runs_and_reproduces() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("report.json")).unwrap()).unwrap();
    let acc = report["accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    let traj = fs::read_to_string(a.path().join("traj.csv")).unwrap();
    assert!(traj.starts_with("t,"));
    assert!(fs::read_to_string(a.path().join("tree.dot")).unwrap().contains("digraph"));

    for file in [
        "cc.json",
        "data/dataset.csv",
        "data/labels.json",
        "test/dataset.csv",
        "model/policy.json",
        "traj.csv",
        "tree.dot",
    ] {
        let x = fs::read(a.path().join(file)).unwrap();
        let y = fs::read(b.path().join(file)).unwrap();
        assert!(x == y, "{file} differs between identical runs");
    }
}

#[test]
fn generation_does_not_depend_on_thread_count() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("rs.json");
    ok(&["network", "--make", "rybko", "--out", p(&spec)]);
    let mut outs = Vec::new();
    for jobs in ["1", "3"] {
        let out = dir.path().join(format!("d{jobs}"));
        ok(&[
            "--jobs", jobs, "generate", "--spec", p(&spec), "--patterns", "all", "--M", "5",
            "--intervals", "60", "--chunk-size", "4", "--seed", "3", "--out", p(&out),
        ]);
        outs.push(fs::read(out.join("dataset.csv")).unwrap());
    }
    assert!(outs[0] == outs[1]);
}
