use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn gridsync(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridsync"))
        .args(args)
        .env_remove("GRIDSYNC_OUT")
        .output()
        .expect("binary runs")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn config(name: &str) -> String {
    scenarios().join(name).display().to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_writes_three_artifacts() {
    let dir = TempDir::new().unwrap();
    let out = gridsync(&[
        "run",
        "--config",
        &config("fridge_naive.toml"),
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    for file in ["trace.csv", "report.csv", "resolved.config"] {
        assert!(dir.path().join(file).is_file(), "{file}");
    }
    let trace = fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert!(trace.starts_with("tick,bus_voltage,rel_voltage,n_flexible_on,price,n_postponed,n_vetoed,n_forced\n"));
    assert_eq!(trace.lines().count(), 5001);
}

#[test]
fn run_is_reproducible_and_resolved_config_closes_the_loop() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let c = TempDir::new().unwrap();
    for dir in [&a, &b] {
        let out = gridsync(&[
            "run",
            "--config",
            &config("washer_veto.toml"),
            "--seed",
            "42",
            "--out",
            path_str(dir.path()),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    let resolved = a.path().join("resolved.config");
    let out = gridsync(&["run", "--config", path_str(&resolved), "--out", path_str(c.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let trace = |d: &TempDir| fs::read(d.path().join("trace.csv")).unwrap();
    assert_eq!(trace(&a), trace(&b));
    assert_eq!(trace(&a), trace(&c));
}

#[test]
fn invalid_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let text = fs::read_to_string(scenarios().join("fridge_randomized.toml"))
        .unwrap()
        .replace("act_probability = 0.1", "act_probability = 1.5");
    let path = dir.path().join("bad.toml");
    fs::write(&path, text).unwrap();
    let out = gridsync(&["run", "--config", path_str(&path), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("act_probability"), "{}", stderr(&out));
}

#[test]
fn missing_config_is_an_io_error() {
    let dir = TempDir::new().unwrap();
    let out = gridsync(&["run", "--config", "/nonexistent/x.toml", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(gridsync(&["run"]).status.code(), Some(1));
    assert_eq!(gridsync(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gridsync(&["--help"]).status.code(), Some(0));
}

fn read_sweep(dir: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(dir.join("sweep.csv"))
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn sweep_over_act_probability() {
    let dir = TempDir::new().unwrap();
    let out = gridsync(&[
        "sweep",
        "--config",
        &config("fridge_randomized.toml"),
        "--param",
        "act_probability",
        "--values",
        "0.05,0.1,0.2,0.5,1.0",
        "--jobs",
        "2",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let rows = read_sweep(dir.path());
    assert_eq!(
        rows[0],
        [
            "value",
            "min_rel_voltage",
            "band_crossings",
            "settling_tick",
            "sync_index"
        ]
    );
    assert_eq!(rows.len(), 6);
    for i in 0..5 {
        assert!(dir.path().join(format!("run_{i:03}/trace.csv")).is_file());
    }
    // some randomized row settles, the certain-action row does not
    assert!(rows[1..5].iter().any(|r| !r[3].is_empty()));
    assert!(rows[5][3].is_empty());

    // the p = 1 row is the naive run
    let naive = TempDir::new().unwrap();
    let out = gridsync(&[
        "run",
        "--config",
        &config("fridge_naive.toml"),
        "--out",
        path_str(naive.path()),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        fs::read(naive.path().join("trace.csv")).unwrap(),
        fs::read(dir.path().join("run_004/trace.csv")).unwrap()
    );
}

#[test]
fn derived_seeds_keep_existing_rows() {
    let sweep = |values: &str| {
        let dir = TempDir::new().unwrap();
        let out = gridsync(&[
            "sweep",
            "--config",
            &config("fridge_randomized.toml"),
            "--param",
            "act_probability",
            "--values",
            values,
            "--derive-seeds",
            "--out",
            path_str(dir.path()),
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
        read_sweep(dir.path())
    };
    let short = sweep("0.1,0.2");
    let long = sweep("0.1,0.2,0.5");
    assert_eq!(short[..], long[..3]);
}

#[test]
fn sweep_rejects_unknown_parameter() {
    let dir = TempDir::new().unwrap();
    let out = gridsync(&[
        "sweep",
        "--config",
        &config("fridge_randomized.toml"),
        "--param",
        "warp_factor",
        "--values",
        "1",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("warp_factor"));
}

#[test]
fn output_root_from_environment() {
    let root = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_gridsync"))
        .args(["run", "--config", &config("fridge_naive.toml"), "--out", "nested"])
        .env("GRIDSYNC_OUT", root.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(root.path().join("nested/trace.csv").is_file());
}

fn hourly_fixture(dip: f64) -> String {
    let mut text = String::from("timestamp,value\n");
    // 2019-03-01T00:00:00Z, two days at 30 s
    for s in (0..2 * 86_400u64).step_by(30) {
        let v = if s % 3600 < 60 { 50.0 - dip } else { 50.0 };
        text.push_str(&format!("{},{v}\n", 1_551_398_400 + s));
    }
    text
}

#[test]
fn analyze_prints_a_positive_score_for_hourly_dips() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("freq.csv");
    fs::write(&input, hourly_fixture(0.05)).unwrap();
    let out = gridsync(&[
        "analyze",
        path_str(&input),
        "--bin-width",
        "60",
        "--period",
        "3600",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let score: f64 = stdout
        .trim()
        .strip_prefix("periodic_deviation=")
        .unwrap()
        .parse()
        .unwrap();
    assert!(score > 0.0);
    let profile = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert_eq!(profile.lines().count(), 1441);
}

#[test]
fn analyze_constant_fixture_gives_identical_means() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("freq.csv");
    fs::write(&input, hourly_fixture(0.0)).unwrap();
    let out = gridsync(&[
        "analyze",
        path_str(&input),
        "--bin-width",
        "900",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let profile = fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    assert!(profile.lines().skip(1).all(|l| l.split(',').nth(1) == Some("50")));
}

#[test]
fn analyze_errors() {
    let dir = TempDir::new().unwrap();
    let out = gridsync(&["analyze", "/nonexistent/freq.csv", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(2));

    let input = dir.path().join("bad.csv");
    fs::write(&input, "timestamp,value\n0,50\n60,50\nlater,50\n").unwrap();
    let out = gridsync(&["analyze", path_str(&input), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));

    let out = gridsync(&[
        "analyze",
        path_str(&input),
        "--bin-width",
        "7",
        "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(1));
}
