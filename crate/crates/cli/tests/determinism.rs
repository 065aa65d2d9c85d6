//! End-to-end checks of the binary: reruns with the same config and seed
//! are byte-identical, and exit codes separate config errors from numeric
//! guards.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn branchdim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_branchdim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    entries.sort_by(|a, b| a.0.cmp(&b.0));
    entries
}

const MCMILLAN: &str = r#"{
    "kind": "mcmillan",
    "law": {"colors": 2, "atoms": [
        {"counts": [0, 0], "prob": 0.25},
        {"counts": [2, 2], "prob": 0.75}
    ]},
    "center": [0.5, 0.5],
    "radius": 0.1,
    "depth": 12,
    "trials": 40
}"#;

const BLOCK: &str = r#"{
    "kind": "block",
    "law": {"colors": 2, "atoms": [
        {"counts": [0, 0], "prob": 0.25},
        {"counts": [2, 2], "prob": 0.75}
    ]},
    "center": [0.5, 0.5],
    "radius": 0.2,
    "order": 4,
    "levels": 2,
    "epsilon": 0.5,
    "trials": 30
}"#;

#[test]
fn reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for (name, body) in [("mcmillan.json", MCMILLAN), ("block.json", BLOCK)] {
        let config = write_config(tmp.path(), name, body);
        let out_a = tmp.path().join(format!("{name}-a"));
        let out_b = tmp.path().join(format!("{name}-b"));
        for out in [&out_a, &out_b] {
            let result = branchdim(&[
                "run",
                &config,
                "--seed",
                "42",
                "--out",
                out.to_str().unwrap(),
            ]);
            assert!(
                result.status.success(),
                "{name}: {}",
                String::from_utf8_lossy(&result.stderr)
            );
        }
        let a = read_dir_sorted(&out_a);
        let b = read_dir_sorted(&out_b);
        assert!(a.iter().any(|(n, _)| n == "summary.json"));
        assert_eq!(a, b, "{name}: reruns must be byte-identical");
    }
}

#[test]
fn trial_override_changes_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "mcmillan.json", MCMILLAN);
    let out = tmp.path().join("out");
    let result = branchdim(&[
        "run",
        &config,
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
        "--trials",
        "7",
    ]);
    assert!(result.status.success());
    let csv = fs::read_to_string(out.join("mcmillan.csv")).unwrap();
    let data_rows = csv.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(data_rows, 7);
    let echo = fs::read_to_string(out.join("config_echo.json")).unwrap();
    assert!(echo.contains("\"trials\": 7"));
}

#[test]
fn invalid_configs_exit_with_code_one() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_config(
        tmp.path(),
        "bad.json",
        r#"{
            "kind": "dimension",
            "law": {"colors": 2, "atoms": [{"counts": [1, 1], "prob": 1.0}]},
            "theta": [1.0, 0.5],
            "depth": 5
        }"#,
    );
    let result = branchdim(&["validate", &bad]);
    assert_eq!(result.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("theta(i) in (0,1) required"), "{stderr}");

    let malformed = write_config(tmp.path(), "malformed.json", "{ not json");
    let result = branchdim(&["validate", &malformed]);
    assert_eq!(result.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&result.stderr).contains("parse error"));
}

#[test]
fn numeric_guards_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "explode.json",
        r#"{"kind": "gw", "atoms": [[16, 1.0]], "depth": 60, "trials": 1}"#,
    );
    let out = tmp.path().join("out");
    let result = branchdim(&[
        "run",
        &config,
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("numeric guard"));
}

#[test]
fn report_prints_the_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(
        tmp.path(),
        "gw.json",
        r#"{"kind": "gw", "atoms": [[0, 0.25], [2, 0.75]], "depth": 30, "trials": 500}"#,
    );
    let out = tmp.path().join("out");
    let result = branchdim(&[
        "run",
        &config,
        "--seed",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(result.status.success());
    let result = branchdim(&["report", out.to_str().unwrap()]);
    assert!(result.status.success());
    let stdout = String::from_utf8_lossy(&result.stdout);
    assert!(stdout.contains("\"extinction_probability\""), "{stdout}");
    assert!(stdout.contains("0.333333333333"), "{stdout}");

    let missing = branchdim(&["report", tmp.path().join("nope").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(1));
}
