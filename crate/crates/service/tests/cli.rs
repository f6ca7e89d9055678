mod common;

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::Path;
use std::process::{Command, Output, Stdio};

use common::fixtures;
use serde_json::Value;
use tempfile::TempDir;

fn cafe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cafe")).args(args).output().unwrap()
}

fn setup() -> (TempDir, String) {
    let dir = TempDir::new().unwrap();
    let config = dir.path().join("cafe.toml");
    fs::write(&config, common::config_text(Path::new("data"))).unwrap();
    (dir, config.display().to_string())
}

fn path(p: &Path) -> String {
    p.display().to_string()
}

#[test]
fn grade_prints_the_golden_report() {
    let f = fixtures().join("product_range");
    let out = cafe(&[
        "grade",
        "--statement",
        &path(&f.join("statement.json")),
        "--submission-file",
        &path(&f.join("submissions/00-golden.json")),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["grade_fraction"], 1.0);
    assert_eq!(out.stdout, fs::read(f.join("reports/00-golden.json")).unwrap());
}

#[test]
fn grade_on_corrupt_json_exits_2() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"student_id\": ").unwrap();
    let st = fixtures().join("product_range/statement.json");
    let out = cafe(&["grade", "--statement", &path(&st), "--submission-file", &path(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("bad.json") && err.contains("line 1"), "{err}");
}

#[test]
fn grade_on_mismatched_payloads_exits_4() {
    let dir = TempDir::new().unwrap();
    let mut sub: Value =
        serde_json::from_str(&fs::read_to_string(fixtures().join("product_range/submissions/00-golden.json")).unwrap())
            .unwrap();
    sub["payloads"].as_object_mut().unwrap().remove("variant");
    let file = dir.path().join("sub.json");
    fs::write(&file, sub.to_string()).unwrap();
    let st = fixtures().join("product_range/statement.json");
    let out = cafe(&["grade", "--statement", &path(&st), "--submission-file", &path(&file)]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn seed_then_export_analytics() {
    let (dir, config) = setup();
    let out = cafe(&["seed", "--config", &config, "--fixtures", &path(&fixtures())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("statement product-range v1"));
    let export = dir.path().join("export");
    let out = cafe(&["export-analytics", "--config", &config, "--out", &path(&export)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let patterns = fs::read_to_string(export.join("participation_patterns.csv")).unwrap();
    assert!(patterns.starts_with("pattern;count\n"));
    assert!(patterns.contains("C1,C2,C3,C4,C5,C6;23\n"));
    let daily = fs::read_to_string(export.join("daily_sessions.csv")).unwrap();
    assert!(daily.starts_with("date,count\n2022-09-13,"));
    // 97 registered in the log plus the configured students
    let progress = fs::read_dir(&export)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("progress_")
        })
        .count();
    assert_eq!(progress, 97);
    // seeding twice adds nothing
    let before = fs::read_to_string(dir.path().join("data/journal.jsonl")).unwrap();
    cafe(&["seed", "--config", &config, "--fixtures", &path(&fixtures())]);
    assert_eq!(
        fs::read_to_string(dir.path().join("data/journal.jsonl")).unwrap(),
        before
    );
}

#[test]
fn mark_and_pca_mark_read_the_store() {
    let (_dir, config) = setup();
    cafe(&["seed", "--config", &config, "--fixtures", &path(&fixtures())]);
    let out = cafe(&[
        "mark",
        "--config",
        &config,
        "--student",
        "s001",
        "--challenge",
        "product-range",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mark: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(mark["kind"], "no_attempt");
    let out = cafe(&["mark", "--config", &config, "--student", "s001", "--challenge", "nope"]);
    assert_eq!(out.status.code(), Some(5));
    let out = cafe(&["pca-mark", "--config", &config, "--student", "s001"]);
    let pca: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(
        pca,
        serde_json::json!({"earned_percent": 0.0, "attainable_percent": 2.0})
    );
}

#[test]
fn serve_answers_health_checks() {
    let (_dir, config) = setup();
    let mut child = Command::new(env!("CARGO_BIN_EXE_cafe"))
        .args(["serve", "--config", &config])
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    let mut stderr = BufReader::new(child.stderr.take().unwrap());
    let mut line = String::new();
    stderr.read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").unwrap().to_string();
    let mut stream = TcpStream::connect(&addr).unwrap();
    write!(
        stream,
        "GET /health HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\n\r\n"
    )
    .unwrap();
    let mut response = String::new();
    stream.read_to_string(&mut response).unwrap();
    child.kill().unwrap();
    child.wait().unwrap();
    assert!(response.starts_with("HTTP/1.1 200"), "{response}");
    assert!(response.contains("\"status\":\"ok\""));
}
