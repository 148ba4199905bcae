use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dps_qkd::wavepacket::{glauber_g2, SourceModel};
use dps_qkd_cli::RunConfig;
use serde_json::Value;
use tempfile::TempDir;

fn dpsqkd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dpsqkd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(out: &Output) -> Value {
    serde_json::from_str(&stdout(out)).unwrap()
}

fn write(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn preset_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("presets")
        .join(format!("{name}.toml"))
}

#[test]
fn preset_files_match_builtin_presets() {
    for name in dps_qkd_cli::config::PRESETS {
        assert_eq!(
            RunConfig::load(&preset_file(name)).unwrap(),
            RunConfig::preset(name).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn kce_sweep_flat_rows() {
    let out = stdout(&dpsqkd(&["kce-sweep", "--n-bins", "2,4,8", "--envelopes", "flat"]));
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "n_bins,kce,qber,visibility,envelope");
    let kces: Vec<f64> = lines[1..]
        .iter()
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(kces, [0.5, 0.75, 0.875]);
}

#[test]
fn kce_sweep_flat_is_minimum_at_fifty_bins() {
    let out = stdout(&dpsqkd(&["--preset", "fig1-theory", "kce-sweep", "--n-bins", "50"]));
    let rows: Vec<(f64, String)> = out
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[1].parse().unwrap(), f[4].to_string())
        })
        .collect();
    assert_eq!(rows.len(), 4);
    let min = rows.iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap();
    assert_eq!(min.1, "flat");
}

#[test]
fn kce_sweep_empty_list_writes_header_only() {
    let out = stdout(&dpsqkd(&["kce-sweep", "--n-bins", ""]));
    assert_eq!(out, "n_bins,kce,qber,visibility,envelope\n");
}

#[test]
fn kce_sweep_to_file_and_unwritable_path() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("sweep.csv");
    stdout(&dpsqkd(&[
        "kce-sweep",
        "--n-bins",
        "2",
        "--envelopes",
        "flat",
        "--out",
        s(&path),
    ]));
    assert_eq!(
        std::fs::read_to_string(&path).unwrap(),
        "n_bins,kce,qber,visibility,envelope\n2,0.5,0.027,0.946,flat\n"
    );

    let bad = dir.path().join("missing").join("sweep.csv");
    let out = dpsqkd(&["kce-sweep", "--out", s(&bad)]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn bad_flags_are_config_errors() {
    assert_eq!(dpsqkd(&["kce-sweep", "--envelopes", "square"]).status.code(), Some(2));
    assert_eq!(dpsqkd(&["kce-sweep", "--n-bins", "1"]).status.code(), Some(2));
    assert_eq!(dpsqkd(&["--preset", "nope", "kce-sweep"]).status.code(), Some(2));
    assert_eq!(dpsqkd(&["frobnicate"]).status.code(), Some(2));
}

#[test]
fn simulate_emits_stats_and_config_echo() {
    let v = json(&dpsqkd(&["--trials", "20000", "--seed", "7", "simulate"]));
    assert_eq!(v["seed"], 7);
    assert_eq!(v["trials"], 20000);
    assert_eq!(v["config"]["run"]["seed"], 7);
    let detected = v["detected"].as_u64().unwrap();
    let sifted = v["sifted_bits"].as_u64().unwrap();
    assert_eq!(sifted + v["edge_detections"].as_u64().unwrap(), detected);
    assert!(v["qber"].as_f64().unwrap() < 0.05);
}

#[test]
fn simulate_zero_trials_fails() {
    let out = dpsqkd(&["--trials", "0", "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("empty session"), "{}", stderr(&out));
}

#[test]
fn simulate_rejects_unknown_config_key() {
    let dir = TempDir::new().unwrap();
    let text = std::fs::read_to_string(preset_file("paper-field-test")).unwrap();
    let path = write(
        &dir,
        "bad.toml",
        &text.replace("[detector]\n", "[detector]\njitter_ps = 30\n"),
    );
    let out = dpsqkd(&["--config", s(&path), "simulate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("detector") && err.contains("jitter_ps"), "{err}");
}

#[test]
fn simulate_writes_detection_log() {
    let dir = TempDir::new().unwrap();
    let log = dir.path().join("det.csv");
    let v = json(&dpsqkd(&["--trials", "5000", "simulate", "--detections", s(&log)]));
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("trial_id,slot,port,alice_bit,bob_bit"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len() as u64, v["detected"].as_u64().unwrap());
    let errors = rows.iter().filter(|r| !r[3].is_empty() && r[3] != r[4]).count() as u64;
    assert_eq!(errors, v["errors"].as_u64().unwrap());
}

fn secure_rate(dir: &TempDir, body: &str) -> Output {
    let path = write(dir, "stats.json", body);
    dpsqkd(&["secure-rate", s(&path)])
}

#[test]
fn secure_rate_field_test_values() {
    let dir = TempDir::new().unwrap();
    let v = json(&secure_rate(&dir, r#"{"sifted_rate_bps": 3048, "qber": 0.032}"#));
    assert!(
        (v["individual_bps"].as_f64().unwrap() / 1117.0 - 1.0).abs() < 0.015,
        "{v}"
    );
    assert!((v["coherent_bps"].as_f64().unwrap() / 433.0 - 1.0).abs() < 0.015, "{v}");
    assert_eq!(v["threshold_ok"], true);
    assert_eq!(v["mu"], 0.37);
    assert_eq!(v["n_bins"], 50);
}

#[test]
fn secure_rate_past_threshold() {
    let dir = TempDir::new().unwrap();
    let v = json(&secure_rate(&dir, r#"{"sifted_rate_bps": 3048, "qber": 0.05}"#));
    assert_eq!(v["threshold_ok"], false);
    assert_eq!(v["coherent_bps"], 0.0);
    assert_eq!(v["coherent_insecure"], true);
}

#[test]
fn secure_rate_error_free() {
    let dir = TempDir::new().unwrap();
    let v = json(&secure_rate(&dir, r#"{"sifted_rate_bps": 3048, "qber": 0}"#));
    assert_eq!(v["individual_bps"], 3048.0);
    assert_eq!(v["coherent_bps"], 3048.0);
}

#[test]
fn secure_rate_malformed_json_reports_position() {
    let dir = TempDir::new().unwrap();
    let out = secure_rate(&dir, "{\n  \"sifted_rate_bps\": 3048,\n  \"qber\": oops\n}");
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("line 3") && err.contains("column"), "{err}");
}

#[test]
fn secure_rate_missing_file_is_io_error() {
    assert_eq!(
        dpsqkd(&["secure-rate", "/nonexistent/stats.json"]).status.code(),
        Some(3)
    );
}

#[test]
fn simulate_output_feeds_secure_rate() {
    let dir = TempDir::new().unwrap();
    let stats = dir.path().join("stats.json");
    stdout(&dpsqkd(&["--trials", "20000", "--out", s(&stats), "simulate"]));
    let sim: Value = serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    let v = json(&dpsqkd(&["secure-rate", s(&stats)]));
    assert_eq!(v["sifted_rate_bps"], sim["sifted_rate_bps"]);
    assert_eq!(v["qber"], sim["qber"]);
}

fn histogram_csv(source: &SourceModel) -> String {
    let mut csv = String::from("tau_ns,counts\n");
    for i in -200..=200 {
        let tau_ns = 2.0 * i as f64;
        csv.push_str(&format!("{tau_ns},{}\n", glauber_g2(tau_ns * 1e-9, source)));
    }
    csv
}

#[test]
fn fit_source_recovers_field_bandwidth_and_width() {
    let dir = TempDir::new().unwrap();
    let source = SourceModel {
        kappa: 4.0e5,
        pump_mw: 0.5,
        ..SourceModel::field_test()
    };
    let path = write(&dir, "hist.csv", &histogram_csv(&source));
    let v = json(&dpsqkd(&["fit-source", s(&path)]));
    let bandwidth = v["bandwidth_hz"].as_f64().unwrap();
    let width = v["width_s"].as_f64().unwrap();
    assert!((bandwidth / 2.3e6 - 1.0).abs() < 0.02, "{v}");
    assert!((width / 178.8e-9 - 1.0).abs() < 0.005, "{v}");
}

#[test]
fn fit_source_constant_histogram_fails() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("tau_ns,counts\n");
    for i in -20..=20 {
        csv.push_str(&format!("{},100\n", 5 * i));
    }
    let out = dpsqkd(&["fit-source", s(&write(&dir, "flat.csv", &csv))]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn fit_source_bad_csv_is_parse_error() {
    let dir = TempDir::new().unwrap();
    let out = dpsqkd(&["fit-source", s(&write(&dir, "bad.csv", "tau_ns,counts\n1,2\nx,3\n"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}
