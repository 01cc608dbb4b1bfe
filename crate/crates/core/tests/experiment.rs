use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use aircomp_core::benchmarks::SchemeId;
use aircomp_core::experiment::{
    aggregate, emit_timeline_csv, emit_trajectory_csv, read_trajectory_csv, run, run_cell, ExperimentSpec, Layout,
    ResultRecord, ScenarioSource, SweepAxis,
};
use aircomp_core::orchestrator::BcdOptions;
use serde_json::Value;

fn spec(out: &Path, schemes: Vec<SchemeId>, seeds: Vec<u64>) -> ExperimentSpec {
    ExperimentSpec {
        scenario: ScenarioSource::Generated {
            layout: Layout::Desk,
            num_uavs: 1,
            duration: 3.0,
            power: 0.8,
        },
        schemes,
        sweep_axis: SweepAxis::None,
        values: Vec::new(),
        seeds,
        out_dir: out.to_path_buf(),
        options: BcdOptions::default(),
        threads: 2,
    }
}

fn strip_runtime(v: &mut Value) {
    match v {
        Value::Object(map) => {
            for key in ["runtime_seconds", "seconds"] {
                map.remove(key);
            }
            map.values_mut().for_each(strip_runtime);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_runtime),
        _ => {}
    }
}

#[test]
fn one_record_per_cell_plus_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), vec![SchemeId::Joint, SchemeId::StaticUav], vec![1, 2, 3]);
    let summary = run(&s).unwrap();
    assert_eq!(summary.failures, 0);
    let json = fs::read_dir(dir.path())
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "json"))
        .count();
    assert_eq!(json, 6);
    assert!(dir.path().join("aggregate.csv").exists());
    for r in &summary.records {
        assert_eq!(r.schema_version, 1);
        assert!(r.d_star <= r.upper_bound);
        assert!(r.verification.as_ref().unwrap().ok());
    }
}

#[test]
fn rerun_is_identical_apart_from_timings() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(&spec(a.path(), vec![SchemeId::Joint], vec![4, 5])).unwrap();
    run(&spec(b.path(), vec![SchemeId::Joint], vec![4, 5])).unwrap();
    for name in ["joint_seed4.json", "joint_seed5.json"] {
        let mut x: Value = serde_json::from_str(&fs::read_to_string(a.path().join(name)).unwrap()).unwrap();
        let mut y: Value = serde_json::from_str(&fs::read_to_string(b.path().join(name)).unwrap()).unwrap();
        strip_runtime(&mut x);
        strip_runtime(&mut y);
        assert_eq!(x, y, "{name}");
    }
    assert_eq!(
        fs::read(a.path().join("aggregate.csv")).unwrap(),
        fs::read(b.path().join("aggregate.csv")).unwrap()
    );
}

#[test]
fn aggregate_means_recompute_from_records() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(dir.path(), vec![SchemeId::Joint, SchemeId::EqualPower], vec![1, 2]);
    s.sweep_axis = SweepAxis::Power;
    s.values = vec![0.1, 0.8];
    let summary = run(&s).unwrap();
    let mut by_cell: BTreeMap<(String, String), Vec<f64>> = BTreeMap::new();
    for f in &summary.record_files {
        let r = ResultRecord::load(f).unwrap();
        by_cell
            .entry((r.scheme.to_string(), r.sweep_value.unwrap().to_string()))
            .or_default()
            .push(r.d_star as f64);
    }
    let mut reader = csv::Reader::from_path(&summary.aggregate_file).unwrap();
    let mut rows = 0;
    for row in reader.records() {
        let row = row.unwrap();
        let key = (row[0].to_string(), row[2].to_string());
        let vals = &by_cell[&key];
        let mean: f64 = row[5].parse().unwrap();
        assert!((mean - vals.iter().sum::<f64>() / vals.len() as f64).abs() < 1e-12);
        rows += 1;
    }
    assert_eq!(rows, 4);
}

#[test]
fn bad_cells_are_isolated() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(dir.path(), vec![SchemeId::Joint], vec![1]);
    s.sweep_axis = SweepAxis::Duration;
    s.values = vec![3.0, 3.3];
    let summary = run(&s).unwrap();
    assert_eq!(summary.records.len(), 2);
    assert_eq!(summary.failures, 1);
    let bad = summary.records.iter().find(|r| r.sweep_value == Some(3.3)).unwrap();
    assert!(bad.error.as_deref().unwrap().contains("3.3"));
    let rows = aggregate(&summary.records);
    assert_eq!(rows.iter().map(|r| r.failures).sum::<usize>(), 1);
}

#[test]
fn invalid_specs_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&spec(dir.path(), vec![], vec![1])).is_err());
    assert!(run(&spec(dir.path(), vec![SchemeId::Joint], vec![])).is_err());
    let mut s = spec(dir.path(), vec![SchemeId::Joint], vec![1]);
    s.sweep_axis = SweepAxis::Power;
    s.values = vec![0.5, -1.0];
    assert!(run(&s).is_err());
}

#[test]
fn trajectory_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), vec![SchemeId::Joint], vec![1]);
    let rec = run_cell(&s, SchemeId::Joint, None, 1);
    let n = rec.state.as_ref().unwrap().trajectories.num_slots();
    let path = dir.path().join("traj.csv");
    emit_trajectory_csv(&rec, &path).unwrap();
    let back = read_trajectory_csv(&path).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(back[0].len(), n + 1);
    assert_eq!(back[0][0], back[0][n]);
    for (a, b) in back[0].iter().zip(&rec.trajectory[0]) {
        assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
    }
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["uav", "n", "t_seconds", "x", "y"]);
    for row in reader.records() {
        let row = row.unwrap();
        let j: f64 = row[1].parse().unwrap();
        let t: f64 = row[2].parse().unwrap();
        assert!((t - j * 0.5).abs() < 1e-12);
    }
}

#[test]
fn static_trajectory_is_constant() {
    let dir = tempfile::tempdir().unwrap();
    let s = spec(dir.path(), vec![SchemeId::StaticUav], vec![2]);
    let rec = run_cell(&s, SchemeId::StaticUav, None, 2);
    let path = dir.path().join("traj.csv");
    emit_trajectory_csv(&rec, &path).unwrap();
    let pts = read_trajectory_csv(&path).unwrap();
    assert!(pts[0].iter().all(|p| *p == pts[0][0]));
}

fn timeline_rows(rec: &ResultRecord, dir: &Path) -> Vec<(usize, f64, usize, usize)> {
    let path = dir.join("timeline.csv");
    emit_timeline_csv(rec, &path).unwrap();
    let mut reader = csv::Reader::from_path(&path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["n", "t_seconds", "uav", "cluster"]);
    reader.deserialize().map(|r| r.unwrap()).collect()
}

#[test]
fn timeline_rows_match_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(dir.path(), vec![SchemeId::Joint], vec![1]);
    s.scenario = ScenarioSource::Generated {
        layout: Layout::Desk,
        num_uavs: 2,
        duration: 3.0,
        power: 0.8,
    };
    let joint = run_cell(&s, SchemeId::Joint, None, 1);
    assert!(joint.d_star > 0);
    let rows = timeline_rows(&joint, dir.path());
    assert_eq!(rows.len(), 3 * joint.d_star);

    let ortho = run_cell(&s, SchemeId::Orthogonal, None, 1);
    let rows = timeline_rows(&ortho, dir.path());
    let mut per_slot = BTreeMap::new();
    for (n, _, _, _) in rows {
        *per_slot.entry(n).or_insert(0) += 1;
    }
    assert!(per_slot.values().all(|&c| c <= 1));
}

#[test]
fn empty_schedule_gives_header_only_timeline() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(dir.path(), vec![SchemeId::Joint], vec![1]);
    s.scenario = ScenarioSource::Generated {
        layout: Layout::Desk,
        num_uavs: 1,
        duration: 3.0,
        power: 1e-9,
    };
    let rec = run_cell(&s, SchemeId::Joint, None, 1);
    assert_eq!(rec.d_star, 0);
    assert!(timeline_rows(&rec, dir.path()).is_empty());
    let text = fs::read_to_string(dir.path().join("timeline.csv")).unwrap();
    assert_eq!(text.trim(), "n,t_seconds,uav,cluster");
}

#[test]
fn power_sweep_is_monotone_at_desk_scale() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = spec(dir.path(), vec![SchemeId::Joint], vec![1, 2, 3]);
    s.scenario = ScenarioSource::Generated {
        layout: Layout::Desk,
        num_uavs: 1,
        duration: 9.0,
        power: 0.8,
    };
    s.sweep_axis = SweepAxis::Power;
    s.values = vec![0.1, 0.3, 0.8];
    let summary = run(&s).unwrap();
    let rows = aggregate(&summary.records);
    let means: Vec<f64> = rows.iter().map(|r| r.mean_d_star).collect();
    assert!(means.windows(2).all(|w| w[0] <= w[1]), "{means:?}");
}
