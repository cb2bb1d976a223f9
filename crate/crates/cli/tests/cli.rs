//! Drives the compiled binary end to end.

use std::fs;
use std::path::Path;
use std::process::Command;

fn ranklab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ranklab"))
}

fn write_config(dir: &Path, output_dir: &Path) -> std::path::PathBuf {
    let path = dir.join("config.json");
    let json = format!(
        r#"{{
  "schema_version": 1,
  "seed": 3,
  "output_dir": "{}",
  "data": {{"synthetic": {{"train_queries": 30, "test_queries": 20,
           "docs_per_query": 8, "feature_dim": 10, "y_max": 4, "noise_std": 0.4}}}},
  "click_sim": {{"eta": 1.0, "epsilon": 0.1, "max_rank": 8}},
  "initial_ranker": {{"fraction": 0.1, "learning_rate": 0.05, "batch_size": 8, "total_steps": 50}},
  "method": "dla",
  "train": {{"learning_rate": 0.05, "batch_size": 32, "total_steps": 300, "hidden": []}}
}}"#,
        output_dir.display()
    );
    fs::write(&path, json).unwrap();
    path
}

#[test]
fn train_writes_artifacts_and_report_summarizes_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = write_config(dir.path(), &out);

    let status = ranklab()
        .args(["train", "--config"])
        .arg(&config)
        .status()
        .unwrap();
    assert!(status.success());
    for artifact in [
        "config.resolved.json",
        "report.csv",
        "report.json",
        "loss_trace.csv",
        "checkpoint.json",
        "status.json",
    ] {
        assert!(out.join(artifact).exists(), "missing {artifact}");
    }

    let output = ranklab().args(["report", "--dir"]).arg(&out).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("dla:"), "summary missing: {stdout}");
    assert!(stdout.contains("ndcg@10"));
}

#[test]
fn evaluate_reproduces_the_training_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let config = write_config(dir.path(), &out);
    assert!(ranklab().args(["train", "--config"]).arg(&config).status().unwrap().success());

    let eval_out = dir.path().join("eval");
    let status = ranklab()
        .args(["evaluate", "--config"])
        .arg(&config)
        .arg("--checkpoint")
        .arg(out.join("checkpoint.json"))
        .arg("--out")
        .arg(&eval_out)
        .status()
        .unwrap();
    assert!(status.success());
    let train_csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let eval_csv = fs::read_to_string(eval_out.join("report.csv")).unwrap();
    assert_eq!(train_csv, eval_csv);
}

#[test]
fn simulate_emits_a_parseable_click_log() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &dir.path().join("run"));
    let log = dir.path().join("clicks.jsonl");
    let status = ranklab()
        .args(["simulate", "--config"])
        .arg(&config)
        .args(["--sessions", "100", "--out"])
        .arg(&log)
        .status()
        .unwrap();
    assert!(status.success());
    let text = fs::read_to_string(&log).unwrap();
    assert_eq!(text.lines().count(), 100);
    assert!(text.lines().all(|l| l.starts_with("{\"qid\":")));
}

#[test]
fn sweep_aggregates_points_into_a_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sweep_base");
    let config = write_config(dir.path(), &out);
    let grid = dir.path().join("grid.json");
    fs::write(&grid, r#"{"seed": [1, 2]}"#).unwrap();

    let status = ranklab()
        .args(["sweep", "--config"])
        .arg(&config)
        .arg("--grid")
        .arg(&grid)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.trim_end().lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[0].starts_with("seed,status,map,ndcg@10"));
    assert!(lines[1].starts_with("1,ok,"));
    assert!(lines[2].starts_with("2,ok,"));
}

#[test]
fn bad_configs_fail_with_stage_tagged_errors() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &dir.path().join("run"));

    // Unknown key injected through an override.
    let output = ranklab()
        .args(["train", "--config"])
        .arg(&config)
        .args(["--set", "train.typo=1"])
        .output()
        .unwrap();
    assert!(!output.status.success());

    // Missing LETOR file fails in the data stage.
    let broken = dir.path().join("broken.json");
    let text = fs::read_to_string(&config).unwrap().replace(
        r#"{"synthetic": {"train_queries": 30, "test_queries": 20,
           "docs_per_query": 8, "feature_dim": 10, "y_max": 4, "noise_std": 0.4}}"#,
        r#"{"letor": {"train_path": "/nonexistent.txt", "test_path": "/nonexistent.txt", "y_max": 4}}"#,
    );
    fs::write(&broken, text).unwrap();
    let output = ranklab().args(["train", "--config"]).arg(&broken).output().unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8(output.stderr).unwrap();
    assert!(stderr.contains("data_load"), "stderr: {stderr}");
}
