use std::path::Path;
use std::process::{Command, Output};

const TINY: &[&str] = &[
    "kb_size=60",
    "num_kbs=2",
    "num_predicates=8",
    "num_constants=20",
    "n_train_queries=10",
    "n_test_queries=5",
    "n_triplets=400",
    "epochs=3",
    "hidden=16",
    "hard_period=2",
    "scorer_epochs=3",
    "scorer_hidden=8",
    "node_cap=5000",
    "collect_node_cap=5000",
    "depth_limit=3",
];

fn horn(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_horn-embed"));
    cmd.args(args).env_remove("HORN_EMBED_OUT");
    if let Some(dir) = out {
        cmd.env("HORN_EMBED_OUT", dir);
    }
    cmd.output().expect("binary runs")
}

fn tiny_args<'a>(sub: &'a str) -> Vec<&'a str> {
    let mut v = vec![sub];
    for kv in TINY {
        v.extend(["--set", kv]);
    }
    v
}

#[test]
fn pipeline_runs_from_the_environment_output_root() {
    let dir = tempfile::tempdir().unwrap();
    let out = horn(&tiny_args("pipeline"), Some(dir.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("reasoner,size,mean,median,fails"));
    assert!(stdout.contains("# node_cap: 5000"));
    assert!(dir.path().join("manifest.json").exists());
    assert!(dir.path().join("compare.csv").exists());
}

#[test]
fn stages_run_one_at_a_time() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for sub in ["gen-kb", "gen-queries", "gen-triplets", "train-embed", "collect-training", "train-scorer", "run", "compare"] {
        let out = horn(&tiny_args(sub), Some(d));
        assert!(out.status.success(), "{sub}: {}", String::from_utf8_lossy(&out.stderr));
    }
    assert!(d.join("metrics.csv").exists());
}

#[test]
fn jobs_flag_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["--jobs", "2"];
    args.extend(tiny_args("gen-kb"));
    assert!(horn(&args, Some(dir.path())).status.success());
    assert_eq!(horn(&["--jobs", "0", "gen-kb"], Some(dir.path())).status.code(), Some(2));
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = Some(dir.path());
    assert_eq!(horn(&["gen-kb", "--preset", "kb9000"], d).status.code(), Some(2));
    assert_eq!(horn(&["gen-kb", "--set", "colour=blue"], d).status.code(), Some(2));
    assert_eq!(horn(&["gen-kb", "--set", "epochs=0"], d).status.code(), Some(2));
    assert_eq!(horn(&["no-such-command"], d).status.code(), Some(2));
}

#[test]
fn malformed_config_file_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.conf");
    std::fs::write(&cfg, "seed = 1\nthis line has no equals sign\n").unwrap();
    let out = horn(&["gen-kb", "--config", cfg.to_str().unwrap()], Some(dir.path()));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn missing_artifacts_exit_with_7() {
    let dir = tempfile::tempdir().unwrap();
    let out = horn(&tiny_args("compare"), Some(dir.path()));
    assert_eq!(out.status.code(), Some(7));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing artifact"));
}

#[test]
fn a_different_config_in_the_same_directory_exits_with_7() {
    let dir = tempfile::tempdir().unwrap();
    assert!(horn(&tiny_args("gen-kb"), Some(dir.path())).status.success());
    let mut args = tiny_args("gen-kb");
    args.extend(["--set", "seed=5"]);
    assert_eq!(horn(&args, Some(dir.path())).status.code(), Some(7));
}
