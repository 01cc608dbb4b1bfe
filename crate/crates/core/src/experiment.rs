//! Batch runs over schemes, sweep values and seeds, with JSON records and
//! plot-ready CSV output.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmarks::{run_scheme, SchemeId};
use crate::orchestrator::{BcdOptions, BcdState, CallCounts, ProbeRecord};
use crate::scenario::{generate_desk_scenario, generate_paper_scenario, Point, Scenario, ScenarioError};
use crate::scheduling::SlotRule;
use crate::verify::{verify_outcome, Report, Tolerances};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("thread pool: {0}")]
    Pool(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    /// Three clusters of five devices.
    Desk,
    /// Six clusters of twenty devices.
    Paper,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSource {
    /// A scenario file; seeds do not change it.
    File(PathBuf),
    Generated {
        layout: Layout,
        num_uavs: usize,
        duration: f64,
        power: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    None,
    /// Per-device power budget in watts.
    Power,
    /// Mission duration in seconds.
    Duration,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::None => "none",
            SweepAxis::Power => "power",
            SweepAxis::Duration => "duration",
        }
    }
}

impl FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(SweepAxis::None),
            "power" | "p" => Ok(SweepAxis::Power),
            "duration" | "t" => Ok(SweepAxis::Duration),
            other => Err(format!("unknown sweep axis '{other}' (expected none, power or duration)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: ScenarioSource,
    pub schemes: Vec<SchemeId>,
    pub sweep_axis: SweepAxis,
    pub values: Vec<f64>,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub options: BcdOptions,
    /// Independent runs executed concurrently; 0 lets the pool decide.
    pub threads: usize,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.schemes.is_empty() {
            return Err(ExperimentError::Spec("no schemes given".into()));
        }
        if self.seeds.is_empty() {
            return Err(ExperimentError::Spec("no seeds given".into()));
        }
        if let ScenarioSource::File(path) = &self.scenario {
            Scenario::load(path)?;
        }
        if self.sweep_axis != SweepAxis::None {
            if self.values.is_empty() {
                return Err(ExperimentError::Spec(format!(
                    "sweep over {} needs at least one value",
                    self.sweep_axis.as_str()
                )));
            }
            if let Some(v) = self.values.iter().find(|v| !(**v > 0.0)) {
                return Err(ExperimentError::Spec(format!("sweep value {v} is not positive")));
            }
        }
        Ok(())
    }

    /// Sweep points; a single `None` when not sweeping.
    fn points(&self) -> Vec<Option<f64>> {
        if self.sweep_axis == SweepAxis::None {
            vec![None]
        } else {
            self.values.iter().map(|&v| Some(v)).collect()
        }
    }

    pub fn build_scenario(&self, value: Option<f64>, seed: u64) -> Result<Scenario, ExperimentError> {
        let mut scenario = match &self.scenario {
            ScenarioSource::File(p) => Scenario::load(p)?,
            ScenarioSource::Generated {
                layout,
                num_uavs,
                duration,
                power,
            } => {
                let (mut t, mut p) = (*duration, *power);
                match (self.sweep_axis, value) {
                    (SweepAxis::Power, Some(v)) => p = v,
                    (SweepAxis::Duration, Some(v)) => t = v,
                    _ => {}
                }
                return Ok(match layout {
                    Layout::Desk => generate_desk_scenario(t, *num_uavs, p, seed)?,
                    Layout::Paper => generate_paper_scenario(t, *num_uavs, p, seed)?,
                });
            }
        };
        match (self.sweep_axis, value) {
            (SweepAxis::Power, Some(v)) => scenario = scenario.with_power_budget(v),
            (SweepAxis::Duration, Some(v)) => {
                scenario.phys.duration = v;
                if scenario.phys.slot_count().is_none() {
                    return Err(ExperimentError::Spec(format!(
                        "duration {v} s is not a multiple of the {} s slot",
                        scenario.phys.delta
                    )));
                }
            }
            _ => {}
        }
        Ok(scenario)
    }
}

/// One active association, with `n` the 1-based slot number flown at
/// waypoint `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub n: usize,
    pub t_seconds: f64,
    pub uav: usize,
    pub cluster: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub schema_version: u32,
    pub scheme: SchemeId,
    pub sweep_axis: SweepAxis,
    pub sweep_value: Option<f64>,
    pub seed: u64,
    pub d_star: usize,
    pub upper_bound: usize,
    pub gamma: Option<f64>,
    /// `Γ` trace of the accepted probe.
    pub gamma_trace: Vec<f64>,
    pub probes: Vec<ProbeRecord>,
    pub calls: Option<CallCounts>,
    pub runtime_seconds: f64,
    pub delta: f64,
    /// Waypoints `0..=N` per UAV.
    pub trajectory: Vec<Vec<Point>>,
    pub timeline: Vec<TimelineEntry>,
    pub verification: Option<Report>,
    pub error: Option<String>,
    pub scenario: Option<Scenario>,
    pub state: Option<BcdState>,
}

impl ResultRecord {
    pub fn file_name(&self) -> String {
        match self.sweep_value {
            Some(v) => format!("{}_{}-{}_seed{}.json", self.scheme, self.sweep_axis.as_str(), v, self.seed),
            None => format!("{}_seed{}.json", self.scheme, self.seed),
        }
    }

    pub fn slot_rule(&self) -> SlotRule {
        if self.scheme == SchemeId::Orthogonal {
            SlotRule::Orthogonal
        } else {
            SlotRule::PerUav
        }
    }

    pub fn is_failure(&self) -> bool {
        self.error.is_some() || self.verification.as_ref().is_some_and(|r| !r.ok())
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| ExperimentError::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), ExperimentError> {
        let text = serde_json::to_string_pretty(self).map_err(|source| ExperimentError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        fs::write(path, text + "\n").map_err(io_err(path))
    }
}

fn timeline(state: &BcdState, delta: f64) -> Vec<TimelineEntry> {
    let mut rows: Vec<TimelineEntry> = state
        .assignment
        .triples()
        .map(|(l, m, n)| TimelineEntry {
            n: n + 1,
            t_seconds: (n + 1) as f64 * delta,
            uav: m,
            cluster: l,
        })
        .collect();
    rows.sort_by_key(|r| (r.n, r.uav, r.cluster));
    rows
}

fn waypoints(state: &BcdState) -> Vec<Vec<Point>> {
    let q = &state.trajectories;
    (0..q.num_uavs())
        .map(|m| (0..=q.num_slots()).map(|j| q.waypoint(m, j)).collect())
        .collect()
}

/// Solves one cell and verifies the result.
pub fn run_cell(
    spec: &ExperimentSpec,
    scheme: SchemeId,
    value: Option<f64>,
    seed: u64,
) -> ResultRecord {
    let start = Instant::now();
    let mut record = ResultRecord {
        schema_version: SCHEMA_VERSION,
        scheme,
        sweep_axis: spec.sweep_axis,
        sweep_value: value,
        seed,
        d_star: 0,
        upper_bound: 0,
        gamma: None,
        gamma_trace: Vec::new(),
        probes: Vec::new(),
        calls: None,
        runtime_seconds: 0.0,
        delta: 0.0,
        trajectory: Vec::new(),
        timeline: Vec::new(),
        verification: None,
        error: None,
        scenario: None,
        state: None,
    };
    let scenario = match spec.build_scenario(value, seed) {
        Ok(s) => s,
        Err(e) => {
            record.error = Some(e.to_string());
            return record;
        }
    };
    record.delta = scenario.phys.delta;
    match run_scheme(&scenario, scheme, &spec.options) {
        Ok(out) => {
            record.d_star = out.d_star;
            record.upper_bound = out.upper_bound;
            if let Some(solve) = out.solve {
                record.gamma = Some(solve.gamma);
                record.gamma_trace = solve
                    .probes
                    .iter()
                    .rev()
                    .find(|p| p.accepted)
                    .map(|p| p.gamma_trace.clone())
                    .unwrap_or_default();
                record.calls = Some(solve.calls);
                record.trajectory = waypoints(&solve.state);
                record.timeline = timeline(&solve.state, scenario.phys.delta);
                let report = verify_outcome(&scenario, &solve, record.slot_rule(), &Tolerances::default());
                if !report.ok() {
                    log::warn!("{scheme} seed {seed}: {} constraint violations", report.violations.len());
                    record.error = Some(format!("verification failed: {}", report.violations.join("; ")));
                }
                record.verification = Some(report);
                record.probes = solve.probes;
                record.state = Some(solve.state);
            }
        }
        Err(e) => record.error = Some(e.to_string()),
    }
    record.runtime_seconds = start.elapsed().as_secs_f64();
    record.scenario = Some(scenario);
    record
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub scheme: SchemeId,
    pub sweep_axis: SweepAxis,
    pub sweep_value: Option<f64>,
    pub runs: usize,
    pub failures: usize,
    pub mean_d_star: f64,
}

/// Mean `D*` over the successful records of each (scheme, sweep value).
pub fn aggregate(records: &[ResultRecord]) -> Vec<AggregateRow> {
    let mut rows: Vec<AggregateRow> = Vec::new();
    for r in records {
        let row = match rows
            .iter_mut()
            .find(|row| row.scheme == r.scheme && row.sweep_value == r.sweep_value && row.sweep_axis == r.sweep_axis)
        {
            Some(row) => row,
            None => {
                rows.push(AggregateRow {
                    scheme: r.scheme,
                    sweep_axis: r.sweep_axis,
                    sweep_value: r.sweep_value,
                    runs: 0,
                    failures: 0,
                    mean_d_star: 0.0,
                });
                rows.last_mut().unwrap()
            }
        };
        if r.is_failure() {
            row.failures += 1;
        } else {
            row.runs += 1;
            row.mean_d_star += r.d_star as f64;
        }
    }
    for row in &mut rows {
        row.mean_d_star = if row.runs > 0 {
            row.mean_d_star / row.runs as f64
        } else {
            f64::NAN
        };
    }
    rows.sort_by(|a, b| {
        a.scheme
            .cmp(&b.scheme)
            .then(a.sweep_value.unwrap_or(0.0).total_cmp(&b.sweep_value.unwrap_or(0.0)))
    });
    rows
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["scheme", "sweep_axis", "sweep_value", "runs", "failures", "mean_d_star"])?;
    for r in rows {
        w.write_record([
            r.scheme.to_string(),
            r.sweep_axis.as_str().to_string(),
            r.sweep_value.map(|v| v.to_string()).unwrap_or_default(),
            r.runs.to_string(),
            r.failures.to_string(),
            r.mean_d_star.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub records: Vec<ResultRecord>,
    pub record_files: Vec<PathBuf>,
    pub aggregate_file: PathBuf,
    pub failures: usize,
}

/// Runs every (scheme, sweep value, seed) cell, writing one JSON record per
/// cell and `aggregate.csv` into the output directory.
pub fn run(spec: &ExperimentSpec) -> Result<RunSummary, ExperimentError> {
    spec.validate()?;
    fs::create_dir_all(&spec.out_dir).map_err(io_err(&spec.out_dir))?;
    let mut cells = Vec::new();
    for &scheme in &spec.schemes {
        for value in spec.points() {
            for &seed in &spec.seeds {
                cells.push((scheme, value, seed));
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.threads)
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))?;
    let records: Vec<ResultRecord> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(scheme, value, seed)| run_cell(spec, scheme, value, seed))
            .collect()
    });
    let mut record_files = Vec::with_capacity(records.len());
    for r in &records {
        let path = spec.out_dir.join(r.file_name());
        r.save(&path)?;
        record_files.push(path);
    }
    let aggregate_file = spec.out_dir.join("aggregate.csv");
    write_aggregate_csv(&aggregate(&records), &aggregate_file)?;
    let failures = records.iter().filter(|r| r.is_failure()).count();
    Ok(RunSummary {
        records,
        record_files,
        aggregate_file,
        failures,
    })
}

/// `uav, n, t_seconds, x, y` with `N + 1` rows per UAV.
pub fn emit_trajectory_csv(record: &ResultRecord, path: &Path) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["uav", "n", "t_seconds", "x", "y"])?;
    for (m, points) in record.trajectory.iter().enumerate() {
        for (j, p) in points.iter().enumerate() {
            w.write_record([
                m.to_string(),
                j.to_string(),
                (j as f64 * record.delta).to_string(),
                p[0].to_string(),
                p[1].to_string(),
            ])?;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// `n, t_seconds, uav, cluster`, one row per active association.
pub fn emit_timeline_csv(record: &ResultRecord, path: &Path) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "t_seconds", "uav", "cluster"])?;
    for e in &record.timeline {
        w.write_record([
            e.n.to_string(),
            e.t_seconds.to_string(),
            e.uav.to_string(),
            e.cluster.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads a trajectory CSV back into per-UAV waypoint lists.
pub fn read_trajectory_csv(path: &Path) -> Result<Vec<Vec<Point>>, ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out: Vec<Vec<Point>> = Vec::new();
    for row in r.deserialize() {
        let (uav, _n, _t, x, y): (usize, usize, f64, f64, f64) = row?;
        if out.len() <= uav {
            out.resize(uav + 1, Vec::new());
        }
        out[uav].push([x, y]);
    }
    Ok(out)
}

/// Record files (`*.json`) in `dir`, sorted by name.
pub fn record_files(dir: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}

/// Writes `<stem>_trajectory.csv` and `<stem>_timeline.csv` next to each
/// record found in `dir`.
pub fn emit_plots(dir: &Path, out: &Path) -> Result<Vec<PathBuf>, ExperimentError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let mut written = Vec::new();
    for path in record_files(dir)? {
        let record = ResultRecord::load(&path)?;
        if record.trajectory.is_empty() {
            continue;
        }
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("record").to_string();
        let traj = out.join(format!("{stem}_trajectory.csv"));
        let time = out.join(format!("{stem}_timeline.csv"));
        emit_trajectory_csv(&record, &traj)?;
        emit_timeline_csv(&record, &time)?;
        written.push(traj);
        written.push(time);
    }
    Ok(written)
}

/// Re-runs the feasibility verifier on the state stored in a record.
pub fn reverify(record: &ResultRecord) -> Option<Report> {
    let scenario = record.scenario.as_ref()?;
    let state = record.state.as_ref()?;
    let plan = crate::verify::Plan {
        assignment: &state.assignment,
        power: &state.power,
        eta: &state.eta,
        trajectories: &state.trajectories,
    };
    Some(crate::verify::verify(
        scenario,
        &plan,
        record.d_star,
        record.slot_rule(),
        &Tolerances::default(),
    ))
}
