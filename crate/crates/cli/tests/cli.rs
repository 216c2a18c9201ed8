// SPDX-License-Identifier: Apache-2.0

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn example() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/programs/running_example.mc")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rareseed"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

fn stderr_json(o: &Output) -> Value {
    let text = String::from_utf8_lossy(&o.stderr);
    let line = text.lines().last().expect("stderr has a line");
    serde_json::from_str(line).expect("stderr ends with JSON")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn rare_reports_the_three_rarest_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["rare", example().to_str().unwrap(), "-o", out]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let v = read_json(&dir.path().join("rare.json"));
    assert_eq!(v["enumerated"], 43);
    let paths = v["paths"].as_array().unwrap();
    let summary: Vec<(u64, &str, u64)> = paths
        .iter()
        .map(|p| {
            (
                p["index"].as_u64().unwrap(),
                p["probability_decimal"].as_str().unwrap(),
                p["length"].as_u64().unwrap(),
            )
        })
        .collect();
    assert_eq!(
        summary,
        [
            (24, "8.16e-18", 26),
            (23, "8.16e-18", 27),
            (14, "8.19e-18", 25)
        ]
    );
    assert_eq!(stdout_json(&o)["status"], "ok");
}

#[test]
fn seeds_feed_the_fuzzer() {
    let dir = tempfile::tempdir().unwrap();
    let seeds = dir.path().join("seeds");
    let o = run(&[
        "gen-seeds",
        example().to_str().unwrap(),
        "-o",
        seeds.to_str().unwrap(),
        "--trace",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let bin = std::fs::read(seeds.join("seed_0_23.bin")).unwrap();
    assert_eq!(&bin[..7], b"DOC<ATT");
    assert_eq!(bin.len(), 16);
    let m = read_json(&seeds.join("manifest.json"));
    assert_eq!(m["filtered"], serde_json::json!([24, 14]));

    let fz = dir.path().join("fuzz");
    let o = run(&[
        "fuzz",
        example().to_str().unwrap(),
        "--seeds",
        seeds.to_str().unwrap(),
        "--budget",
        "500",
        "--sample-every",
        "100",
        "-o",
        fz.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = std::fs::read_to_string(fz.join("coverage.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("execs,covered_edges"));
    assert_eq!(lines.count(), 5);
    let stats = read_json(&fz.join("fuzz_stats.json"));
    assert_eq!(stats["executions"], 500);
    let deep = stats["time_to_cover"]
        .as_array()
        .unwrap()
        .iter()
        .find(|t| t["name"] == "b3:T")
        .unwrap()
        .clone();
    assert_eq!(deep["execs"], 1);
}

#[test]
fn graph_exports() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["cfg", example().to_str().unwrap(), "-o", out]);
    assert_eq!(o.status.code(), Some(0));
    let dot = std::fs::read_to_string(dir.path().join("cfg_eip.dot")).unwrap();
    assert!(dot.starts_with("digraph eip"));
    let o = run(&[
        "cfg",
        example().to_str().unwrap(),
        "-o",
        out,
        "--format",
        "json",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let g = read_json(&dir.path().join("cfg_eip.json"));
    assert_eq!(g["vertices"].as_array().unwrap().len(), 29);
    let o = run(&["selectivity", example().to_str().unwrap(), "-o", out]);
    assert_eq!(o.status.code(), Some(0));
    let s = read_json(&dir.path().join("selectivity.json"));
    assert_eq!(s.as_array().unwrap().len(), 9);
}

#[test]
fn experiment_writes_series_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "experiment",
        example().to_str().unwrap(),
        "-o",
        out,
        "--budget",
        "400",
        "--trials",
        "2",
        "--sample-every",
        "200",
        "--jobs",
        "2",
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("experiment.csv")).unwrap();
    assert!(csv.starts_with("trial,campaign,execs,covered_edges\n"));
    assert!(csv.lines().any(|l| l.starts_with("1,rare,")));
    let s = read_json(&dir.path().join("summary.json"));
    assert_eq!(s["trials"], 2);
    assert_eq!(s["budget"], 400);
}

#[test]
fn path_cap_writes_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "paths",
        example().to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
        "--max-paths",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["kind"], "path_cap");
    let lines = std::fs::read_to_string(dir.path().join("paths.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 5);
}

#[test]
fn failures_have_exit_codes_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.mc");
    std::fs::write(&bad, "int main() {\n    return x;\n}\n").unwrap();
    let o = run(&[
        "cfg",
        bad.to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr_json(&o);
    assert_eq!(e["status"], "error");
    assert_eq!(e["kind"], "semantic");
    assert_eq!((e["line"].as_u64(), e["col"].as_u64()), (Some(2), Some(12)));

    std::fs::write(&bad, "int main() { return 0 }").unwrap();
    let o = run(&[
        "cfg",
        bad.to_str().unwrap(),
        "-o",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(stderr_json(&o)["kind"], "syntax");

    let o = run(&["cfg", dir.path().join("missing.mc").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stderr_json(&o)["kind"], "io");

    let o = run(&["rare", example().to_str().unwrap(), "--bogus"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn empty_corpus_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("dead.mc");
    // The only rare path needs 1 == 2.
    std::fs::write(
        &p,
        "input[2];\nint main() {\n    int k = 1;\n    if (in[0] == 'x' && in[1] == 'y') {\n        if (k == 2) { return 1; }\n    }\n    return 0;\n}\n",
    )
    .unwrap();
    let o = run(&[
        "gen-seeds",
        p.to_str().unwrap(),
        "--k",
        "1",
        "-o",
        dir.path().join("s").to_str().unwrap(),
    ]);
    let code = o.status.code();
    let stderr = String::from_utf8_lossy(&o.stderr).to_string();
    assert_eq!(code, Some(2), "{stderr}");
    assert_eq!(stderr_json(&o)["kind"], "empty_corpus");
}
