use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use quench_lab::output::{sha256_hex, MANIFEST_NAME};
use quench_lab::RunManifest;

fn lab(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quench-lab"))
        .args(args)
        .current_dir(dir)
        .env("QUENCH_LAB_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_NAME)).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

const SMALL: &str = "[grid]\nn_x = 128\nn_y = 8\n\n[scenario]\nplots = false\n";

#[test]
fn speeds_match_closed_forms() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("speeds");
    let cfg = write_config(tmp.path(), SMALL);
    let r = lab(
        &["speeds", "--config", &cfg, "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let rows = csv_rows(&out.join("speeds.csv"));
    let speed = |ell: &str| -> f64 { rows.iter().find(|r| &r[0] == ell).unwrap()[2].parse().unwrap() };
    let c0 = 2.0 / (3.0 * 6f64.sqrt()) * (2.0 + 7f64.sqrt()) * (7f64.sqrt() - 1.0).sqrt();
    assert!((speed("0") - c0).abs() < 1e-8);
    assert!((speed("1") - 7.0 / (3.0 * 3f64.sqrt())).abs() < 1e-8);
    let m = manifest(&out);
    assert_eq!(m.scenario, "speeds");
    assert!(m.stale_files(&out).is_empty());
    assert!(m.files.iter().any(|f| f.path == "config.effective.toml"));
}

#[test]
fn reruns_give_identical_csv_bytes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "[grid]\nn_x = 128\nn_y = 8\n\n[scenario]\nplots = true\nk_values = [0.1, 0.9]\n",
    );
    let mut digests = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let r = lab(
            &["fig6-kscan", "--config", &cfg, "--out", out.to_str().unwrap()],
            tmp.path(),
        );
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
        let m = manifest(&out);
        assert!(m.stale_files(&out).is_empty());
        let csv = fs::read(out.join("kscan.csv")).unwrap();
        assert_eq!(
            m.files.iter().find(|f| f.path == "kscan.csv").unwrap().sha256,
            sha256_hex(&csv)
        );
        assert!(out.join("kscan.svg").exists());
        digests.push((sha256_hex(&csv), sha256_hex(&fs::read(out.join("kscan.svg")).unwrap())));
    }
    assert_eq!(digests[0], digests[1]);
}

#[test]
fn config_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let cfg = write_config(tmp.path(), "[grid]\nn_x = 1000\n");
    let r = lab(
        &["speeds", "--config", &cfg, "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert_eq!(r.status.code(), Some(2));
    let err = String::from_utf8_lossy(&r.stderr);
    assert!(err.contains("line 2"), "{err}");

    let cfg = write_config(tmp.path(), "[model]\ngamma = -1.0\ndelta = 5.0\n");
    let r = lab(&["speeds", "--config", &cfg], tmp.path());
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("line 3"));

    let r = lab(&["speeds", "--override", "grid.n_y=3"], tmp.path());
    assert_eq!(r.status.code(), Some(2));

    let r = lab(&["fig2-nothing"], tmp.path());
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    // no crossing between these speeds
    let cfg = write_config(tmp.path(), &format!("{SMALL}c_min = 2.0\nc_max = 2.5\nells = [1]\n"));
    let r = lab(&["hopf", "--config", &cfg, "--out", out.to_str().unwrap()], tmp.path());
    assert_eq!(r.status.code(), Some(3), "{}", String::from_utf8_lossy(&r.stderr));
}

#[test]
fn override_reaches_the_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let cfg = write_config(tmp.path(), SMALL);
    let r = lab(
        &[
            "speeds",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
            "--override",
            "model.gamma=2",
        ],
        tmp.path(),
    );
    assert!(r.status.success());
    let echo = fs::read_to_string(out.join("config.effective.toml")).unwrap();
    assert!(echo.contains("gamma = 2"), "{echo}");
    let m = manifest(&out);
    assert_eq!(m.config_sha256, sha256_hex(echo.as_bytes()));
}

#[test]
fn short_pattern_run_writes_fields() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let cfg = write_config(
        tmp.path(),
        "[grid]\nn_x = 128\nn_y = 8\n\n[numerics]\ndt = 0.05\nt_max = 2.0\nwindow = 1.0\n\n\
         [scenario]\nseeds = [\"checkerboard\"]\nplots = true\n",
    );
    let r = lab(
        &["fig1-patterns", "--config", &cfg, "--out", out.to_str().unwrap()],
        tmp.path(),
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let rows = csv_rows(&out.join("pattern_checkerboard.csv"));
    assert_eq!(rows.len(), 128 * 8);
    assert_eq!(csv_rows(&out.join("patterns.csv")).len(), 1);
    assert!(out.join("pattern_checkerboard.svg").exists());
    assert!(manifest(&out).stale_files(&out).is_empty());
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = quench_lab::config::ExperimentConfig::from_path(&path, &[]);
            assert!(cfg.is_ok(), "{}: {:?}", path.display(), cfg.err());
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
