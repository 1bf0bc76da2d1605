use std::path::Path;
use std::process::{Command, Output};

fn wpcn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wpcn")).args(args).env("WPCN_THREADS", "1").output().expect("runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn small_sweep(dir: &Path) -> Output {
    wpcn(&[
        "figure",
        "power_vs_rs1",
        "--trials",
        "2",
        "--no-plot",
        "--out-dir",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn sweep_csv_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (ra, rb) = (small_sweep(a.path()), small_sweep(b.path()));
    assert!(ra.status.success(), "{}", String::from_utf8_lossy(&ra.stderr));
    assert!(rb.status.success());
    assert_eq!(stdout(&ra), stdout(&rb));
    let fa = std::fs::read(a.path().join("power_vs_rs1.csv")).unwrap();
    let fb = std::fs::read(b.path().join("power_vs_rs1.csv")).unwrap();
    assert_eq!(fa, fb);
    let csv = String::from_utf8(fa).unwrap();
    assert!(csv.starts_with("# config_hash="));
    assert!(csv.lines().nth(1).unwrap().starts_with("sweep_var,sweep_value,scheme,mean,"));
}

#[test]
fn solve_once_reports_infeasibility() {
    let args = ["solve-once", "--preset", "wsr_vs_ps2", "--point", "0", "--seed", "9", "--method", "joint_fixed"];
    let text = wpcn(&args);
    assert!(text.status.success());
    assert!(stdout(&text).contains("status: infeasible"));

    let json = wpcn(&[&args[..], &["--format", "json"]].concat());
    let v: serde_json::Value = serde_json::from_str(&stdout(&json)).unwrap();
    assert_eq!(v["result"]["status"], "infeasible");
    assert!(v["result"]["message"].as_str().unwrap().contains("no win-win cooperation"));
}

#[test]
fn solve_once_json_has_allocation() {
    let out = wpcn(&["solve-once", "--preset", "wsr_vs_ps1", "--seed", "1", "--format", "json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["result"]["status"], "optimal");
    assert!(v["result"]["objective"].as_f64().unwrap() > 0.0);
}

#[test]
fn presets_round_trip_through_config_files() {
    let list = stdout(&wpcn(&["figure", "--list"]));
    assert!(list.lines().any(|l| l == "wsr_vs_ps1"));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    let dumped = wpcn(&["figure", "power_vs_rs1", "--dump-config"]);
    std::fs::write(&path, stdout(&dumped)).unwrap();
    let from_file = wpcn(&[
        "sweep",
        "--config",
        path.to_str().unwrap(),
        "--trials",
        "2",
        "--no-plot",
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert!(from_file.status.success(), "{}", String::from_utf8_lossy(&from_file.stderr));
    let other = tempfile::tempdir().unwrap();
    assert_eq!(stdout(&from_file), stdout(&small_sweep(other.path())));
}

#[test]
fn bad_input_exits_with_error() {
    let out = wpcn(&["figure", "no_such_preset"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));

    let out = wpcn(&["solve-once", "--method", "sideways"]);
    assert_eq!(out.status.code(), Some(1));
}
