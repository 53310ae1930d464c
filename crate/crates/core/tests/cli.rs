use std::path::Path;
use std::process::{Command, Output};

use roofgraph::bench::BenchItem;
use roofgraph::EvalReport;

fn roofgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roofgraph")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn synth_reconstruct_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = roofgraph(&["synth", "--output", path(d), "--archetype", "hip", "--points", "8000", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(d.join("hip.xyz").exists() && d.join("hip_gt.obj").exists());

    let (cloud, pred, candidates) = (d.join("hip.xyz"), d.join("pred.obj"), d.join("candidates.csv"));
    let out = roofgraph(&[
        "reconstruct",
        "--input",
        path(&cloud),
        "--output",
        path(&pred),
        "--dump-candidates",
        path(&candidates),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let header = std::fs::read_to_string(&candidates).unwrap();
    assert!(header.starts_with("i,j,path_score,scale_factor,accepted"));

    let report = d.join("report.json");
    let out = roofgraph(&[
        "eval",
        "--input",
        path(&pred),
        "--gt",
        path(&d.join("hip_gt.obj")),
        "--cloud",
        path(&cloud),
        "--output",
        path(&report),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r: EvalReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!(r.cf1 >= 90.0, "CF1 {}", r.cf1);
}

#[test]
fn score_writes_vertex_and_edge_tables() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(roofgraph(&["synth", "--output", path(d), "--archetype", "gable", "--points", "500"]).status.success());
    let out = roofgraph(&["score", "--input", path(&d.join("gable.xyz")), "--output", path(&d.join("s.csv"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let vertices = std::fs::read_to_string(d.join("s.csv")).unwrap();
    let edges = std::fs::read_to_string(d.join("s_edges.csv")).unwrap();
    assert_eq!(vertices.lines().count(), 501);
    assert!(edges.lines().count() > 500);
}

#[test]
fn bench_reports_every_item_then_the_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    let out = roofgraph(&["synth", "--suite", "--output", path(&suite), "--points", "4000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = roofgraph(&["bench", "--input", path(&suite), "--jobs", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 6);
    let names: Vec<String> = lines[..5].iter().map(|l| serde_json::from_str::<BenchItem>(l).unwrap().name).collect();
    assert_eq!(names, ["flat", "gable", "hip", "l_gable", "pyramid"]);
    assert!(lines[5].starts_with("{\"aggregate\""));

    // a cloud without ground truth is an item failure
    std::fs::copy(suite.join("hip.xyz"), suite.join("orphan.xyz")).unwrap();
    assert_eq!(roofgraph(&["bench", "--input", path(&suite)]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(roofgraph(&["reconstruct"]).status.code(), Some(2));
    assert_eq!(roofgraph(&["bench", "--input", path(d), "--jobs", "0"]).status.code(), Some(2));
    let conf = d.join("bad.conf");
    std::fs::write(&conf, "no_such_key = 1\n").unwrap();
    let out = roofgraph(&["synth", "--output", path(d), "--archetype", "flat", "--params", path(&conf)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no_such_key"));
}

#[test]
fn missing_input_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = roofgraph(&["reconstruct", "--input", path(&d.join("nope.xyz")), "--output", path(&d.join("o.obj"))]);
    assert_eq!(out.status.code(), Some(1));
}
