use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn qmit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qmit"))
        .current_dir(dir)
        .env_remove("QMIT_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = qmit(dir, args);
    assert!(
        out.status.success(),
        "qmit {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

const DETECTOR_SPEC: &str = r#"{"qubits": [
    {"mu0": -1.0, "mu1": 1.0, "sigma": 0.6},
    {"mu0": -1.0, "mu1": 1.2, "sigma": 0.7},
    {"mu0": -0.8, "mu1": 1.0, "sigma": 0.5}
]}"#;

/// Writes spec files and runs simulate, calibrate and mitigate in `dir`.
fn pipeline(dir: &Path) -> PathBuf {
    fs::write(dir.join("det.json"), DETECTOR_SPEC).unwrap();
    fs::write(
        dir.join("cal.json"),
        r#"{"preparation": "calibration", "n_shots": 5000, "seed": 11, "mode": "analog"}"#,
    )
    .unwrap();
    fs::write(
        dir.join("exp.json"),
        r#"{"preparation": {"string": "101"}, "n_shots": 800, "seed": 12, "mode": "analog"}"#,
    )
    .unwrap();
    ok(dir, &["simulate", "--spec", "cal.json", "--detector-spec", "det.json", "--out", "cal.jsonl"]);
    ok(dir, &["calibrate", "--mode", "analog", "--n-bin", "8", "--in", "cal.jsonl", "--out", "detector.json"]);
    ok(dir, &["simulate", "--spec", "exp.json", "--detector-spec", "det.json", "--out", "shots.jsonl"]);
    ok(dir, &["mitigate", "--detector", "detector.json", "--shots", "shots.jsonl", "--out", "result.json"]);
    dir.join("result.json")
}

#[test]
fn seeded_pipeline_is_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let ra = fs::read(pipeline(a.path())).unwrap();
    let rb = fs::read(pipeline(b.path())).unwrap();
    assert_eq!(ra, rb);

    let doc: serde_json::Value = serde_json::from_slice(&ra).unwrap();
    let pops = doc["populations"].as_object().unwrap();
    let total: f64 = pops.values().map(|v| v.as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert!(pops["101"].as_f64().unwrap() > 0.8, "{pops:?}");
    assert_eq!(doc["config"]["n_p"], 101);

    for f in ["cal.jsonl", "detector.json", "shots.jsonl", "result.json"] {
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(a.path().join(format!("{f}.manifest.json"))).unwrap()).unwrap();
        assert_eq!(m["tool"], "qmit");
        assert!(m["wall_time_s"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn manifest_replay_reproduces_outputs() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    pipeline(d);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("shots.jsonl.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 12);
    assert_eq!(manifest["subcommand"], "simulate");

    ok(d, &["replay", "shots.jsonl.manifest.json", "--out", "shots2.jsonl"]);
    assert_eq!(fs::read(d.join("shots.jsonl")).unwrap(), fs::read(d.join("shots2.jsonl")).unwrap());

    ok(d, &["replay", "result.json.manifest.json", "--out", "result2.json"]);
    assert_eq!(fs::read(d.join("result.json")).unwrap(), fs::read(d.join("result2.json")).unwrap());
    // The replay leaves its own manifest, which replays as well.
    ok(d, &["replay", "result2.json.manifest.json", "--out", "result3.json"]);
    assert_eq!(fs::read(d.join("result.json")).unwrap(), fs::read(d.join("result3.json")).unwrap());
}

#[test]
fn mode_mismatch_exits_one() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    pipeline(d);
    fs::write(d.join("bits.jsonl"), "{\"bits\":\"101\",\"count\":5}\n{\"bits\":\"001\"}\n").unwrap();
    let out = qmit(d, &["mitigate", "--detector", "detector.json", "--shots", "bits.jsonl", "--out", "r.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("mode mismatch"), "{err}");

    let out = qmit(
        d,
        &["--json-errors", "mitigate", "--detector", "detector.json", "--shots", "bits.jsonl", "--out", "r.json"],
    );
    assert_eq!(out.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(doc["error"]["kind"], "mode_mismatch");
}

#[test]
fn compare_writes_three_rows() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    pipeline(d);
    ok(
        d,
        &[
            "compare", "--methods", "bayes,ibu,mim", "--detector", "detector.json", "--shots", "shots.jsonl",
            "--target", "101", "--out", "table.csv",
        ],
    );
    let table = fs::read_to_string(d.join("table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "method,success,seconds");
    assert_eq!(lines.len(), 4);
    for (line, name) in lines[1..].iter().zip(["bayes", "ibu", "mim"]) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[0], name);
        let p: f64 = cells[1].parse().unwrap();
        assert!((0.0..=1.0).contains(&p), "{line}");
    }

    ok(d, &["report", "--table", "table.csv", "--gnuplot", "--out", "table.dat"]);
    let dat = fs::read_to_string(d.join("table.dat")).unwrap();
    assert!(dat.starts_with("# method success seconds\nbayes "), "{dat}");
}

#[test]
fn report_renders_trace() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    pipeline(d);
    ok(d, &["report", "--result", "result.json", "--out", "trace.csv"]);
    let csv = fs::read_to_string(d.join("trace.csv")).unwrap();
    assert!(csv.starts_with("sweep,tv\n1,"), "{csv}");
}

#[test]
fn binary_pipeline_and_resource_limit() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::write(d.join("det.json"), DETECTOR_SPEC).unwrap();
    fs::write(
        d.join("cal.json"),
        r#"{"preparation": "calibration", "n_shots": 2000, "seed": 1, "mode": "binary"}"#,
    )
    .unwrap();
    fs::write(
        d.join("exp.json"),
        r#"{"preparation": {"distribution": {"000": 0.5, "111": 0.5}}, "n_shots": 400, "seed": 2, "mode": "binary"}"#,
    )
    .unwrap();
    ok(d, &["simulate", "--spec", "cal.json", "--detector-spec", "det.json", "--out", "cal.jsonl"]);
    ok(d, &["calibrate", "--mode", "binary", "--in", "cal.jsonl", "--out", "detector.json"]);
    ok(d, &["simulate", "--spec", "exp.json", "--detector-spec", "det.json", "--out", "shots.jsonl"]);
    ok(d, &["--threads", "2", "mitigate", "--detector", "detector.json", "--shots", "shots.jsonl", "--out", "r.json"]);

    let out = qmit(
        d,
        &["mitigate", "--detector", "detector.json", "--shots", "shots.jsonl", "--out", "r.json", "--max-cache-entries", "4"],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(qmit(dir.path(), &["mitigate", "--bogus"]).status.code(), Some(1));
    assert_eq!(qmit(dir.path(), &["frobnicate"]).status.code(), Some(1));
    let missing = qmit(dir.path(), &["mitigate", "--detector", "nope.json", "--shots", "s", "--out", "o"]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(qmit(dir.path(), &["--version"]).status.code(), Some(0));
}
