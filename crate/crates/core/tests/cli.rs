mod common;

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};

use common::{fixture, hash_dir, http};

fn pathwise(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathwise")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn run(diagram: &str, out: &Path, extra: &[&str]) -> Output {
    let d = fixture(diagram);
    let t = fixture("terminology.csv");
    let mut args =
        vec!["run", "--diagram", d.to_str().unwrap(), "--terminology", t.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    pathwise(&args)
}

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("chain3.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let names: Vec<String> = hash_dir(dir.path()).into_keys().collect();
    let expected: Vec<String> = [
        "audit.json",
        "cql_audit.json",
        "definitions.cql",
        "diagram.json",
        "governance.json",
        "pipeline.log",
        "routing.cql",
        "terminology.csv",
    ]
    .iter()
    .map(|s| format!("three_step_chain_{s}"))
    .collect();
    assert_eq!(names, expected);
}

#[test]
fn schema_failure_exits_with_phase_code_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("dangling_edge.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(11));
    assert!(String::from_utf8_lossy(&out.stderr).contains("E_SCHEMA"));
    assert!(hash_dir(dir.path()).is_empty());
}

#[test]
fn path_explosion_fails_graph_phase_after_ingest_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("cyclic45.json", dir.path(), &["--journey-cap", "50"]);
    assert_eq!(out.status.code(), Some(12));
    let names: Vec<String> = hash_dir(dir.path()).into_keys().collect();
    assert_eq!(
        names,
        ["synthetic_lung_triage_diagram.json", "synthetic_lung_triage_pipeline.log", "synthetic_lung_triage_terminology.csv"]
    );
    let log = std::fs::read_to_string(dir.path().join("synthetic_lung_triage_pipeline.log")).unwrap();
    assert!(log.contains("FAILED E_PATH_EXPLOSION"));
}

#[test]
fn cyclic_fixture_log_records_critic_iterations() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("cyclic45.json", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0));
    let log = std::fs::read_to_string(dir.path().join("synthetic_lung_triage_pipeline.log")).unwrap();
    let iterations: u32 = log
        .lines()
        .find(|l| l.starts_with("phase 4"))
        .and_then(|l| l.split("iterations_used=").nth(1))
        .and_then(|s| s.split(|c: char| !c.is_ascii_digit()).next())
        .and_then(|s| s.parse().ok())
        .unwrap();
    assert!((1..=3).contains(&iterations));
    assert!(log.contains("journey_defines=803"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for dir in [&a, &b] {
        assert_eq!(run("cyclic45.json", dir.path(), &[]).status.code(), Some(0));
    }
    assert_eq!(hash_dir(a.path()), hash_dir(b.path()));
}

#[test]
fn configuration_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    for extra in [
        &["--version", "1.0"][..],
        &["--generator", "oracle"][..],
        &["--auditor", "llm"][..],
        &["--lexicon", "/nonexistent/lexicon.json"][..],
    ] {
        assert_eq!(run("chain3.json", dir.path(), extra).status.code(), Some(2), "{extra:?}");
    }
    let out = pathwise(&["run", "--diagram", "/nonexistent.json", "--terminology", "/nonexistent.csv"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_documents_exit_codes() {
    let out = pathwise(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("Exit codes") && text.contains("15"));
}

#[test]
fn check_and_enumerate_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    run("chain3.json", dir.path(), &[]);
    let defs = dir.path().join("three_step_chain_definitions.cql");
    let routing = dir.path().join("three_step_chain_routing.cql");
    let t = fixture("terminology.csv");
    let ok =
        pathwise(&["check", routing.to_str().unwrap(), "--deps", defs.to_str().unwrap(), "--terminology", t.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0));
    let missing_dep = pathwise(&["check", routing.to_str().unwrap(), "--terminology", t.to_str().unwrap(), "--json"]);
    assert_eq!(missing_dep.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&missing_dep.stdout).unwrap();
    assert_eq!(report["ok"], false);

    let out = pathwise(&["enumerate", "--diagram", fixture("cyclic45.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let audit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(audit["journey_count"], 803);
    assert_eq!(audit["has_cycle"], true);
}

#[test]
fn serve_refuses_bad_artifacts_and_serves_good_ones() {
    let empty = tempfile::tempdir().unwrap();
    let out = pathwise(&["serve", "--artifacts", empty.path().to_str().unwrap(), "--port", "0"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("E_STARTUP_CHECK"));

    let dir = tempfile::tempdir().unwrap();
    run("chain3.json", dir.path(), &[]);
    let mut child = Command::new(env!("CARGO_BIN_EXE_pathwise"))
        .args(["serve", "--artifacts", dir.path().to_str().unwrap(), "--port", "0"])
        .env("RUST_LOG", "warn")
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stderr.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().rsplit("http://").next().unwrap().parse().unwrap();
    let (status, body) = http(addr, "GET", "/cds-services", None);
    child.kill().unwrap();
    child.wait().unwrap();
    assert_eq!(status, 200);
    let doc: serde_json::Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(doc["services"][0]["id"], "three_step_chain");
}
