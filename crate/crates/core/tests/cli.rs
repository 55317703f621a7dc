//! End-to-end tests of the `fbm-current` binary: every bundled config runs
//! to success, re-runs are byte-identical, and invalid input exits with 2.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_fbm-current");

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(subcommand: &str, config: &Path, out: &Path, seed: Option<u64>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.arg(subcommand)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out);
    if let Some(s) = seed {
        cmd.arg("--seed").arg(s.to_string());
    }
    cmd.output().expect("binary runs")
}

const ALL: [&str; 8] = [
    "membership",
    "stransform",
    "current",
    "chaos-reconstruct",
    "mc-verify",
    "gamma-check",
    "fbm-sample",
    "divergence-probe",
];

#[test]
fn every_bundled_config_succeeds_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in ALL {
        let cfg = config_dir().join(format!("{sub}.cfg"));
        let out = tmp.path().join(sub);
        let result = run(sub, &cfg, &out, None);
        assert!(
            result.status.success(),
            "{sub} failed: {}",
            String::from_utf8_lossy(&result.stderr)
        );
        let csv = std::fs::read_to_string(out.join(format!("{sub}.csv"))).unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("# schema=1"), "{sub}: schema line");
        let header = lines.next().expect("header row");
        assert!(header.contains(','), "{sub}: header {header}");
        assert!(lines.next().is_some(), "{sub}: at least one data row");
        let manifest = std::fs::read_to_string(out.join("manifest.txt")).unwrap();
        assert!(manifest.contains("status=ok"), "{sub}: manifest status");
        assert!(manifest.contains("wall_ms="), "{sub}: manifest wall time");
    }
}

#[test]
fn same_seed_reruns_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in ["fbm-sample", "mc-verify"] {
        let cfg = config_dir().join(format!("{sub}.cfg"));
        let out_a = tmp.path().join(format!("{sub}-a"));
        let out_b = tmp.path().join(format!("{sub}-b"));
        assert!(run(sub, &cfg, &out_a, Some(99)).status.success());
        assert!(run(sub, &cfg, &out_b, Some(99)).status.success());
        let a = std::fs::read(out_a.join(format!("{sub}.csv"))).unwrap();
        let b = std::fs::read(out_b.join(format!("{sub}.csv"))).unwrap();
        assert_eq!(a, b, "{sub}: CSV bodies differ between same-seed runs");
    }
}

#[test]
fn different_seed_changes_sample_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config_dir().join("fbm-sample.cfg");
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    assert!(run("fbm-sample", &cfg, &out_a, Some(1)).status.success());
    assert!(run("fbm-sample", &cfg, &out_b, Some(2)).status.success());
    let a = std::fs::read(out_a.join("fbm-sample.csv")).unwrap();
    let b = std::fs::read(out_b.join("fbm-sample.csv")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn out_of_range_hurst_exits_two_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "[gamma-check]\nx = 0.5\nh = 1.2\nhorizon = 1.0\n").unwrap();
    let result = run("gamma-check", &cfg, &tmp.path().join("out"), None);
    assert_eq!(result.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("H out of (0,1)"), "stderr: {stderr}");
}

#[test]
fn unknown_key_and_missing_key_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("unknown.cfg");
    std::fs::write(&cfg, "[membership]\nx = 0\nh = 0.5\nwhatever = 3\n").unwrap();
    let result = run("membership", &cfg, &tmp.path().join("o1"), None);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("unknown keys"));

    let cfg = tmp.path().join("missing.cfg");
    std::fs::write(&cfg, "[membership]\nh = 0.5\n").unwrap();
    let result = run("membership", &cfg, &tmp.path().join("o2"), None);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("missing required key"));
}

#[test]
fn nonmember_current_spec_exits_two_with_rule() {
    // x = 0, d = 2, H = 0.7: Hd = 1.4 >= 1, not a Hida distribution.
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("refused.cfg");
    std::fs::write(
        &cfg,
        "[current]\nx = 0 0\nh = 0.7\nhorizon = 1.0\ni = 1\nphi1 = 0.2\n",
    )
    .unwrap();
    let result = run("current", &cfg, &tmp.path().join("out"), None);
    assert_eq!(result.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&result.stderr).contains("small_hd"));
}

#[test]
fn missing_config_file_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let result = run(
        "membership",
        &tmp.path().join("nope.cfg"),
        &tmp.path().join("out"),
        None,
    );
    assert_eq!(result.status.code(), Some(2));
}
