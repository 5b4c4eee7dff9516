use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_dma-nearfield");

fn run(args: &[&str], outdir: Option<&Path>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args).env_remove("DMA_NEARFIELD_OUTDIR");
    if let Some(dir) = outdir {
        cmd.arg("--outdir").arg(dir);
    }
    cmd.output().unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

const SMALL_DEPTH: &[&str] = &["depth", "--w-range", "0:2:0.5"];

#[test]
fn depth_writes_csv_plot_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(SMALL_DEPTH, Some(dir.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(dir.path(), "depth.csv");
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert!(header.starts_with("w,x_delta,critical_range,delta_minus,delta_plus"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 5);
    assert!(dir.path().join("depth.plt").exists());
    assert!(read(dir.path(), "depth.manifest").contains("r="));
}

#[test]
fn manifest_reproduces_run() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let args = ["depth", "--w-range", "0:3:1", "--delta", "0.8", "--set", "alpha=1.5"];
    assert!(run(&args, Some(first.path())).status.success());
    let manifest = first.path().join("depth.manifest");
    let replay = ["depth", "--config", manifest.to_str().unwrap()];
    let out = run(&replay, Some(second.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read(first.path(), "depth.csv"), read(second.path(), "depth.csv"));
}

#[test]
fn outdir_from_environment_and_flag_precedence() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();
    let status = Command::new(BIN)
        .args(SMALL_DEPTH)
        .env("DMA_NEARFIELD_OUTDIR", env_dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    assert!(env_dir.path().join("depth.csv").exists());

    let status = Command::new(BIN)
        .args(SMALL_DEPTH)
        .arg("--outdir")
        .arg(flag_dir.path())
        .env("DMA_NEARFIELD_OUTDIR", env_dir.path().join("unused"))
        .status()
        .unwrap();
    assert!(status.success());
    assert!(flag_dir.path().join("depth.csv").exists());
    assert!(!env_dir.path().join("unused").exists());
}

#[test]
fn json_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &[
            "gain-curve",
            "--alpha-list",
            "0,4",
            "--dr-range",
            "0:1:0.5",
            "--format",
            "json",
        ],
        Some(dir.path()),
    );
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&read(dir.path(), "gain_curve.json")).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 6);
    assert_eq!(v["columns"][0]["name"], "alpha");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run(&["reproduce", "--figure", "4"], Some(dir.path())).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["depth", "--set", "bogus=1"], Some(dir.path())).status.code(),
        Some(2)
    );
    assert_eq!(
        run(&["depth", "--delta", "1.5"], Some(dir.path())).status.code(),
        Some(2)
    );
    assert_eq!(run(&["no-such-command"], None).status.code(), Some(2));
    let out = run(&["depth", "--w-range", "0:1:1", "--set", "theta=0"], Some(dir.path()));
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_config_line_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# comment\nn_m = 10\nwavelength = oops\n").unwrap();
    let out = run(&["depth", "--config", cfg.to_str().unwrap()], Some(dir.path()));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(":3:"));
}

#[test]
fn gain_curve_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["gain-curve", "--dr-range", "0:4:0.5"];
    assert!(run(&args, Some(a.path())).status.success());
    assert!(run(&args, Some(b.path())).status.success());
    assert_eq!(read(a.path(), "gain_curve.csv"), read(b.path(), "gain_curve.csv"));
}
