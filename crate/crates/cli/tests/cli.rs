use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FAST_METHODS: &str = "ets,linreg,snaive,tsglm";

fn pyroseason(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pyroseason"))
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .env_remove("PYROSEASON_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(out.status.success(), "failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn synth(dir: &Path, cells: &str) {
    ok(pyroseason(dir, &["synth", "--cells", cells, "--seed", "11", "--out", "det.csv", "--truth", "truth.csv"]));
}

/// Every file under `root`, keyed by relative path.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn run_is_byte_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "6");
    for (out, threads) in [("a", "1"), ("b", "3")] {
        ok(pyroseason(d, &["run", "--input", "det.csv", "--out-dir", out, "--methods", FAST_METHODS, "--threads", threads]));
    }
    let (a, b) = (tree(&d.join("a")), tree(&d.join("b")));
    assert!(a.len() > 20);
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (k, v) in &a {
        assert!(v == &b[k], "{} differs", k.display());
    }
    let manifest: Value = serde_json::from_slice(&a[Path::new("run-manifest.json")]).unwrap();
    let listed = manifest["outputs"].as_array().unwrap();
    assert_eq!(listed.len() + 1, a.len());
    for o in listed {
        let bytes = &a[Path::new(o["path"].as_str().unwrap())];
        assert_eq!(o["sha256"], sha256(bytes));
    }
}

fn sha256(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

#[test]
fn staged_commands_match_the_pipeline() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "5");
    ok(pyroseason(d, &["run", "--input", "det.csv", "--out-dir", "run", "--methods", FAST_METHODS]));
    ok(pyroseason(d, &["ingest", "--input", "det.csv", "--out", "s/cells.bin"]));
    ok(pyroseason(d, &["seasons", "--cells", "s/cells.bin", "--out", "s/profiles.csv"]));
    ok(pyroseason(d, &[
        "forecast", "--cells", "s/cells.bin", "--profiles", "s/profiles.csv", "--methods", FAST_METHODS,
        "--out", "s/forecasts.csv",
    ]));
    ok(pyroseason(d, &["evaluate", "--forecasts", "s/forecasts.csv", "--out", "s/report.csv"]));
    ok(pyroseason(d, &["export", "--mafc", "s/mafc.csv", "--cells", "s/cells.bin", "--mafc-profiles", "s/profiles.csv"]));
    ok(pyroseason(d, &["export", "--profiles", "s/profiles.csv", "--field", "fss_mean", "--geojson", "s/maps/fss_mean.geojson"]));
    for f in [
        "cells.bin",
        "profiles.csv",
        "forecasts.csv",
        "models.csv",
        "report.csv",
        "report_summary.csv",
        "report_friedman.csv",
        "report_nemenyi.csv",
        "report_wilcoxon.csv",
        "mafc.csv",
        "maps/fss_mean.geojson",
        "maps/fss_mean_hist.csv",
    ] {
        assert!(fs::read(d.join("run").join(f)).unwrap() == fs::read(d.join("s").join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn map_layers_cover_every_profiled_cell() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "4");
    ok(pyroseason(d, &["run", "--input", "det.csv", "--out-dir", "o", "--methods", "snaive,linreg"]));
    let profiles = fs::read_to_string(d.join("o/profiles.csv")).unwrap();
    let rows = profiles.lines().count() - 1;
    assert_eq!(rows, 4);
    for layer in ["mean_length_days", "peak_month", "fss_trend", "best_nmae_fss", "best_mase_monthly"] {
        let doc: Value = serde_json::from_slice(&fs::read(d.join(format!("o/maps/{layer}.geojson"))).unwrap()).unwrap();
        assert_eq!(doc["features"].as_array().unwrap().len(), rows, "{layer}");
    }
    ok(pyroseason(d, &[
        "export", "--report", "o/report.csv", "--field", "mase_fss", "--method", "snaive", "--geojson", "snaive.geojson",
    ]));
    let doc: Value = serde_json::from_slice(&fs::read(d.join("snaive.geojson")).unwrap()).unwrap();
    assert_eq!(doc["features"].as_array().unwrap().len(), rows);
    let hist = fs::read_to_string(d.join("snaive_hist.csv")).unwrap();
    assert_eq!(hist.lines().count(), 257);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "3");
    fs::write(d.join("p.conf"), "# test\nseed = 5\nmethods = snaive\ninputs = det.csv\nout_dir = conf_out\n").unwrap();
    ok(pyroseason(d, &["--config", "p.conf", "run", "--seed", "9"]));
    let m: Value = serde_json::from_slice(&fs::read(d.join("conf_out/run-manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["seed"], 9);
    assert_eq!(m["config"]["methods"], serde_json::json!(["snaive"]));
    assert_eq!(m["inputs"][0]["sha256"], sha256(&fs::read(d.join("det.csv")).unwrap()));
}

#[test]
fn missing_input_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let out = pyroseason(tmp.path(), &["run", "--input", "nowhere.csv", "--out-dir", "o"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ingest") && err.contains("nowhere.csv"), "{err}");
}

#[test]
fn bad_configuration_is_a_usage_error() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(d.join("bad.conf"), "colour = red\n").unwrap();
    assert_eq!(pyroseason(d, &["--config", "bad.conf", "grid", "--resolution", "1"]).status.code(), Some(2));
    assert_eq!(pyroseason(d, &["run", "--input", "x.csv", "--methods", "prophet"]).status.code(), Some(2));
    assert_eq!(pyroseason(d, &["frobnicate"]).status.code(), Some(2));
    let out = Command::new(env!("CARGO_BIN_EXE_pyroseason"))
        .current_dir(d)
        .env("PYROSEASON_THREADS", "lots")
        .args(["grid", "--resolution", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn strict_mode_rejects_malformed_rows() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("bad.csv"),
        "latitude,longitude,acq_date,confidence\n10,20,2005-03-01,90\n10,twenty,2005-03-02,90\n",
    )
    .unwrap();
    ok(pyroseason(d, &["ingest", "--input", "bad.csv", "--out", "c.bin"]));
    let out = pyroseason(d, &["ingest", "--input", "bad.csv", "--out", "c2.bin", "--strict"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!d.join("c2.bin").exists());
}

#[test]
fn grid_geojson_has_every_cell() {
    let tmp = TempDir::new().unwrap();
    ok(pyroseason(tmp.path(), &["grid", "--resolution", "1", "--geojson", "g.geojson"]));
    let doc: Value = serde_json::from_slice(&fs::read(tmp.path().join("g.geojson")).unwrap()).unwrap();
    assert_eq!(doc["features"].as_array().unwrap().len(), 32);
}

#[test]
fn synth_truth_lists_every_cell_year() {
    let tmp = TempDir::new().unwrap();
    ok(pyroseason(tmp.path(), &["synth", "--cells", "7", "--years", "12", "--out", "d.csv", "--truth", "t.csv"]));
    let truth = fs::read_to_string(tmp.path().join("t.csv")).unwrap();
    assert!(truth.starts_with("cell_id,year,active_days,peak_month"));
    assert_eq!(truth.lines().count(), 1 + 7 * 12);
}
