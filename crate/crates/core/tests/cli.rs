use std::fs;
use std::process::Command;

use serde_json::Value;

fn aircomp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_aircomp"))
}

#[test]
fn solve_writes_records_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = aircomp()
        .args(["solve", "--duration", "3", "--seeds", "1-2", "--max-iters", "20", "--tol", "1e-3", "--threads", "1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("joint_seed1.json").exists());
    assert!(dir.path().join("joint_seed2.json").exists());
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("joint_seed1.json")).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);

    let status = aircomp().arg("verify").arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(0));

    let plots = dir.path().join("plots");
    let status = aircomp().args(["emit-plots", "--from"]).arg(dir.path()).arg("--out").arg(&plots).status().unwrap();
    assert_eq!(status.code(), Some(0));
    assert!(plots.join("joint_seed1_trajectory.csv").exists());
    assert!(plots.join("joint_seed1_timeline.csv").exists());
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(aircomp().args(["solve", "--scheme", "tdma"]).status().unwrap().code(), Some(1));
    assert_eq!(aircomp().args(["solve", "--seeds", "5-2"]).status().unwrap().code(), Some(1));
    assert_eq!(aircomp().args(["sweep", "--duration", "3"]).status().unwrap().code(), Some(1));
    assert_eq!(aircomp().args(["solve", "--scenario", "/no/such/file.json"]).status().unwrap().code(), Some(1));
    assert_eq!(aircomp().arg("--help").status().unwrap().code(), Some(0));
}

#[test]
fn partial_failures_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let status = aircomp()
        .args(["sweep", "--sweep-axis", "duration", "--values", "3,3.3", "--seeds", "1", "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(dir.path().join("aggregate.csv").exists());
}

#[test]
fn tampered_record_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let status = aircomp().args(["solve", "--duration", "3", "--out"]).arg(dir.path()).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let path = dir.path().join("joint_seed1.json");
    let mut v: Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    v["d_star"] = Value::from(v["d_star"].as_u64().unwrap() + 1);
    fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let out = aircomp().arg("verify").arg(&path).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("fewer than"));
}

#[test]
fn generated_scenario_file_can_be_solved() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("scenario.json");
    let status = aircomp().args(["generate", "--duration", "3", "--seed", "7", "--out"]).arg(&file).status().unwrap();
    assert_eq!(status.code(), Some(0));
    let status = aircomp()
        .args(["compare", "--scenario"])
        .arg(&file)
        .arg("--out")
        .arg(dir.path().join("runs"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let agg = fs::read_to_string(dir.path().join("runs/aggregate.csv")).unwrap();
    assert_eq!(agg.lines().count(), 6);
}
