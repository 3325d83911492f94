//! Exit codes, run directories and reproducibility of the command-line tool.

use std::path::Path;
use std::process::Command;

fn lpkdv(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lpkdv")).args(args).current_dir(cwd).output().unwrap()
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = lpkdv(&["selftest"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("runs/selftest/manifest.json").is_file());
}

#[test]
fn degenerate_parameters_exit_with_two_and_name_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"p": 1.0, "q": 1.0}"#).unwrap();
    let out = lpkdv(&["dispersion", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mu = p - q = 0"));
}

#[test]
fn coeffs_prints_reference_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = lpkdv(&["coeffs"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let json_end = text.rfind('}').unwrap();
    let v: serde_json::Value = serde_json::from_str(&text[..=json_end]).unwrap();
    assert!((v["M1"].as_f64().unwrap() - 2.23607).abs() < 1e-5);
    assert!((v["rho2"].as_f64().unwrap() - 0.213333).abs() < 1e-6);
}

#[test]
fn identical_config_and_seed_give_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"seed": 7, "window": [64, 32]}"#).unwrap();
    for cmd in ["simulate", "flow-check", "zs-limit"] {
        let mut reports = Vec::new();
        for run in ["a", "b"] {
            let out_dir = dir.path().join(format!("{cmd}-{run}"));
            let out = lpkdv(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap(), "--quiet"], dir.path());
            assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
            reports.push(std::fs::read(out_dir.join("report.json")).unwrap());
        }
        assert_eq!(reports[0], reports[1], "{cmd}");
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut reports = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(threads);
        let out = lpkdv(&["isospectral", "--threads", threads, "--out", out_dir.to_str().unwrap(), "--quiet"], dir.path());
        assert_eq!(out.status.code(), Some(0));
        reports.push(std::fs::read(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
}
