use std::path::Path;
use std::process::{Command, Output};

fn chartbench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chartbench"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).trim().to_string()
}

#[test]
fn generate_prints_counts() {
    let dir = tempfile::tempdir().unwrap();
    let o = chartbench(dir.path(), &["generate"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "tables=1020 items=7140");
    let o = chartbench(dir.path(), &["generate", "--parts", "A", "--out-dir", "a"]);
    assert_eq!(stdout(&o), "tables=1020 items=3060");
    assert!(dir.path().join("a/manifest.json").is_file());
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(chartbench(dir.path(), &["generate", "--seed", "x12"]).status.code(), Some(2));
    assert_eq!(chartbench(dir.path(), &["generate", "--parts", "E"]).status.code(), Some(2));
    assert_eq!(chartbench(dir.path(), &["render", "--manifest", "missing.json"]).status.code(), Some(2));
    assert_eq!(chartbench(dir.path(), &["verify", "--only", "42"]).status.code(), Some(2));
    assert_eq!(chartbench(dir.path(), &["frobnicate"]).status.code(), Some(2));
}

#[test]
fn generation_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    chartbench(dir.path(), &["generate", "--parts", "A", "--out-dir", "one"]);
    chartbench(dir.path(), &["generate", "--parts", "A", "--out-dir", "two"]);
    let read = |d: &str| std::fs::read(dir.path().join(d).join("manifest.json")).unwrap();
    assert_eq!(read("one"), read("two"));
}

#[test]
fn pipeline_on_ground_truth_scores_100() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let filter = "part=A|C,digit_length=3,entity_count=3";
    let gen = chartbench(d, &["generate"]);
    assert!(gen.status.success());
    let render = chartbench(d, &["render", "--filter", filter]);
    assert!(render.status.success(), "{}", String::from_utf8_lossy(&render.stderr));
    assert!(d.join("out/images").read_dir().unwrap().count() > 0);

    assert!(chartbench(d, &["import", "--ground-truth", "--filter", filter]).status.success());
    let score = chartbench(d, &["--json", "score"]);
    assert!(score.status.success());
    let summary: serde_json::Value = serde_json::from_str(&stdout(&score)).unwrap();
    assert_eq!(summary["mean_rms_tbe_f1"], 100.0);
    assert_eq!(summary["parse_failures"], 0);
    assert!(d.join("out/scores.csv").is_file());

    let analyze = chartbench(d, &["analyze"]);
    assert!(analyze.status.success(), "{}", String::from_utf8_lossy(&analyze.stderr));
    // Identical scores under every condition: no significant difference.
    assert!(stdout(&analyze).contains("no_difference"), "{}", stdout(&analyze));
    let report = chartbench(d, &["report"]);
    assert!(report.status.success());
    assert!(d.join("out/report/dataset.json").is_file());
}

#[test]
fn import_reads_third_party_dump() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    chartbench(d, &["generate", "--parts", "A"]);
    let manifest: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("out/manifest.json")).unwrap()).unwrap();
    let id = manifest["items"][0]["id"].as_str().unwrap();
    let dump = format!(
        "{}\n{}\n",
        serde_json::json!({"item_id": id, "output": "| Year | A |\n|---|---|\n| 2018 | 7,000 |", "model": "other"}),
        serde_json::json!({"item_id": id, "text": "garbled", "model": "third"}),
    );
    std::fs::write(d.join("dump.jsonl"), dump).unwrap();
    let o = chartbench(d, &["import", "--input", "dump.jsonl"]);
    assert_eq!(stdout(&o), "imported=2 skipped=0");
    let o = chartbench(d, &["--json", "score"]);
    let summary: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(summary["scored"], 2);
    assert_eq!(summary["parse_failures"], 1);

    std::fs::write(d.join("bad.jsonl"), "{\"item_id\": \"nope\", \"raw_text\": \"\", \"model\": \"m\"}\n").unwrap();
    assert_eq!(chartbench(d, &["import", "--input", "bad.jsonl"]).status.code(), Some(2));
}

#[test]
fn empty_predictions_give_empty_scores() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    chartbench(d, &["generate", "--parts", "A"]);
    std::fs::write(d.join("out/predictions.jsonl"), "").unwrap();
    let o = chartbench(d, &["score"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert_eq!(std::fs::read_to_string(d.join("out/scores.jsonl")).unwrap(), "");
}

#[test]
fn verify_lists_and_runs() {
    let dir = tempfile::tempdir().unwrap();
    let list = chartbench(dir.path(), &["verify", "--list"]);
    assert_eq!(list.status.code(), Some(0));
    assert_eq!(stdout(&list).lines().count(), 11);
    let run = chartbench(dir.path(), &["verify", "--only", "2,3,6"]);
    assert_eq!(run.status.code(), Some(0), "{}", stdout(&run));
    assert_eq!(stdout(&run).lines().filter(|l| l.starts_with("[PASS]")).count(), 3);
}
