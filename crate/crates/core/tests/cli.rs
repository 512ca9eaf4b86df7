//! Binary-level tests: command flow, exit codes, and stdout payloads.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sentiq"))
}

fn run(data_dir: &Path, args: &[&str]) -> Output {
    bin()
        .arg("--data-dir")
        .arg(data_dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn full_command_flow() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");

    let out = run(
        &data,
        &[
            "generate",
            "--entities",
            "25",
            "--reviews-per-entity",
            "8",
            "--labels",
            "150",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let summary: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(summary["entities"], 25);

    let out = run(&data, &["validate"]);
    assert!(out.status.success(), "{}", stderr(&out));

    let out = run(&data, &["build"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["entities"], 25);
    assert!(report["membership_test_accuracy"].as_f64().unwrap() > 0.5);

    let out = run(&data, &["interpret", "--predicate", "spotless room"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let interp: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(interp["method"], "word2vec");
    assert_eq!(interp["confidence"], 1.0);

    let out = run(
        &data,
        &[
            "query",
            "--sql",
            "select * from entities where price_pn < 280 and \"spotless room\"",
            "--k",
            "5",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let result: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let rows = result["rows"].as_array().unwrap();
    assert!(!rows.is_empty() && rows.len() <= 5);
    // degrees are non-increasing
    let degrees: Vec<f64> = rows.iter().map(|r| r["degree"].as_f64().unwrap()).collect();
    assert!(degrees.windows(2).all(|w| w[0] >= w[1]));

    // minmax variant also runs
    let out = run(
        &data,
        &[
            "query",
            "--sql",
            "select * from entities where \"spotless room\" and \"friendly staff\"",
            "--variant",
            "minmax",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    // hard-threshold evaluation runs and returns a subset
    let out = run(
        &data,
        &[
            "query",
            "--sql",
            "select * from entities where \"spotless room\"",
            "--hard",
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));

    let out = run(&data, &["eval", "--queries-per-set", "10"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = stdout(&out);
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "method,workload,quality,excluded,runtime_ms");
    let body: Vec<&str> = lines.collect();
    assert_eq!(body.len(), 9, "3 methods × 3 workloads:\n{csv}");
    for method in ["engine", "ir", "hard"] {
        for workload in ["easy", "medium", "hard"] {
            assert!(
                body.iter().any(|l| l.starts_with(&format!("{method},{workload},"))),
                "missing row {method},{workload}"
            );
        }
    }

    let out = run(&data, &["eval", "--timing"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let timing: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(timing["rankings_match"], true);
    assert!(timing["speedup"].as_f64().unwrap() > 1.0);
}

#[test]
fn rebuilds_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = run(&data, &["generate", "--entities", "10", "--reviews-per-entity", "5", "--labels", "50"]);
    assert!(out.status.success());
    assert!(run(&data, &["build"]).status.success());
    let hash_dir = |p: &Path| -> Vec<(String, Vec<u8>)> {
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(p)
            .unwrap()
            .map(|e| {
                let e = e.unwrap();
                (
                    e.file_name().to_string_lossy().into_owned(),
                    std::fs::read(e.path()).unwrap(),
                )
            })
            .collect();
        files.sort();
        files
    };
    let first = hash_dir(&data.join("build"));
    assert!(run(&data, &["build"]).status.success());
    let second = hash_dir(&data.join("build"));
    assert_eq!(
        first.len(),
        second.len()
    );
    for ((name_a, bytes_a), (name_b, bytes_b)) in first.iter().zip(&second) {
        assert_eq!(name_a, name_b);
        assert_eq!(bytes_a, bytes_b, "artifact {name_a} changed across rebuilds");
    }
}

#[test]
fn corrupted_jsonl_reports_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let out = run(&data, &["generate", "--entities", "5", "--reviews-per-entity", "3", "--labels", "20"]);
    assert!(out.status.success());
    // truncate a line in the middle of reviews.jsonl
    let path = data.join("reviews.jsonl");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[2] = "{ this is not json";
    std::fs::write(&path, lines.join("\n")).unwrap();
    let out = run(&data, &["build"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("reviews.jsonl"), "{err}");
    assert!(err.contains(":3:"), "no line number in {err}");
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");

    // usage error → 1
    let out = bin().arg("no-such-command").output().unwrap();
    assert_eq!(out.status.code(), Some(1));

    // missing artifacts → 2 with an actionable message
    let out = run(&data, &["interpret", "--predicate", "x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("entities.jsonl"), "{}", stderr(&out));

    // syntax error in a query → 2 with position and expectation
    let out = run(&data, &["generate", "--entities", "5", "--reviews-per-entity", "3", "--labels", "0"]);
    assert!(out.status.success());
    assert!(run(&data, &["build"]).status.success());
    let out = run(&data, &["query", "--sql", "select * from where"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("position 14"), "{}", stderr(&out));

    // validation failure → 2 and the report names the offender
    let reviews = data.join("reviews.jsonl");
    let mut text = std::fs::read_to_string(&reviews).unwrap();
    text.push_str("{\"entity_id\":\"ghost\",\"review_id\":\"r9\",\"text\":\"fine\"}\n");
    std::fs::write(&reviews, text).unwrap();
    let out = run(&data, &["validate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("ghost"));
}

#[test]
fn config_file_and_seed_flag_are_honored() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let config_path = dir.path().join("engine.toml");
    std::fs::write(&config_path, "seed = 5\ntop_k = 3\n").unwrap();
    let out = bin()
        .arg("--data-dir")
        .arg(&data)
        .arg("--config")
        .arg(&config_path)
        .args(["generate", "--entities", "8", "--reviews-per-entity", "4", "--labels", "30"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(run(&data, &["build"]).status.success());
    // top_k from the config limits the default result size
    let out = bin()
        .arg("--data-dir")
        .arg(&data)
        .arg("--config")
        .arg(&config_path)
        .args(["query", "--sql", "select * from entities"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    let result: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(result["rows"].as_array().unwrap().len(), 3);
    // a bad config is rejected as a data error
    std::fs::write(&config_path, "w2v_threshold = 3.0\n").unwrap();
    let out = bin()
        .arg("--data-dir")
        .arg(&data)
        .arg("--config")
        .arg(&config_path)
        .args(["query", "--sql", "select * from entities"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
