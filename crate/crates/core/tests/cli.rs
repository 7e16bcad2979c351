// SPDX-License-Identifier: Apache-2.0

use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_er-balance"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

const SMALL: [&str; 6] = ["--n", "600", "--keys", "40", "--m", "3"];

#[test]
fn gen_then_run_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("data.csv");
    let csv = csv.to_str().unwrap();
    let out = cli(&[&["gen", "--out", csv][..], &SMALL].concat());
    assert!(out.status.success());
    let text = fs::read_to_string(csv).unwrap();
    assert_eq!(text.lines().next(), Some("key,name"));
    assert_eq!(text.lines().count(), 601);

    let from_file = json(&cli(&["run", "--input", csv, "--m", "3", "--r", "4", "--strategy", "basic"]));
    let generated = json(&cli(&[&["run", "--r", "4", "--strategy", "basic"][..], &SMALL].concat()));
    assert_eq!(from_file["total_pairs"], generated["total_pairs"]);
    assert_eq!(from_file["per_task"], generated["per_task"]);
}

#[test]
fn analyze_reports_the_matrix() {
    let bdm = json(&cli(&[&["analyze"][..], &SMALL].concat()));
    let sizes: u64 = bdm["sizes"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(sizes, 600);
    assert_eq!(bdm["m"], 3);
}

#[test]
fn plans_of_every_strategy() {
    for strategy in ["basic", "blocksplit", "pairrange"] {
        let plan = json(&cli(&[&["plan", "--strategy", strategy, "--r", "5"][..], &SMALL].concat()));
        assert_eq!(plan["r"], 5, "{strategy}");
    }
    let ranges = json(&cli(&[&["plan", "--r", "5"][..], &SMALL].concat()));
    assert_eq!(ranges["boundaries"].as_array().unwrap().len(), 5);
}

#[test]
fn run_report_counts_every_pair() {
    let report = json(&cli(&[&["run", "--strategy", "blocksplit", "--r", "4"][..], &SMALL].concat()));
    let per_task: u64 = report["per_task"]
        .as_array()
        .unwrap()
        .iter()
        .map(|t| t["comparisons_done"].as_u64().unwrap())
        .sum();
    assert_eq!(per_task, report["total_pairs"].as_u64().unwrap());
    assert!(report.get("wall_time_ms").is_none_or(Value::is_null));
}

#[test]
fn bench_writes_csv() {
    let out = cli(&[&["bench", "--rs", "1,2", "--strategies", "basic,pairrange", "--matcher", "null"][..], &SMALL].concat());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("strategy,r,imbalance,replication,makespan,speedup"));
    assert_eq!(lines.count(), 4);
}

#[test]
fn exit_codes() {
    assert_eq!(cli(&["run", "--r", "0"]).status.code(), Some(2));
    assert_eq!(cli(&["run", "--threshold", "1.5"]).status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bad.csv");
    fs::write(&csv, "id,name\n1,x\n").unwrap();
    let out = cli(&["run", "--input", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let missing = dir.path().join("absent.csv");
    assert_eq!(cli(&["analyze", "--input", missing.to_str().unwrap()]).status.code(), Some(3));
}
