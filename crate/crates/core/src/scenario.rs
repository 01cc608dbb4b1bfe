//! Problem instances: physical constants, clusters of ground devices and the
//! UAV fleet size.
//!
//! Internally every quantity is stored in linear SI units. Scenario files may
//! give the channel gain and noise power as decibel strings (`"-50 dB"`,
//! `"-80 dBm"`); they are converted when the file is read.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::ops::Range;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

/// Horizontal coordinate in meters.
pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    squared_distance(a, b).sqrt()
}

pub fn squared_distance(a: Point, b: Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Cluster centers used by the six-cluster evaluation setup.
pub const PAPER_CENTERS: [Point; 6] = [
    [100.0, 50.0],
    [200.0, 200.0],
    [-100.0, 100.0],
    [-400.0, 150.0],
    [-200.0, -200.0],
    [-250.0, -100.0],
];

pub const PAPER_DEVICES_PER_CLUSTER: usize = 20;
pub const PLACEMENT_RADIUS: f64 = 50.0;
pub const PAPER_EPSILON: f64 = 2e-3;
pub const PAPER_DELTA: f64 = 0.5;

/// Devices per cluster in the reduced desk-scale preset.
pub const DESK_DEVICES_PER_CLUSTER: usize = 5;
/// MSE target of the desk-scale preset.
///
/// With `K` aligned devices the smallest achievable MSE at per-device received
/// power `A²` is `σ²/(K(K A² + σ²))`, so meeting a target `ε` needs
/// `A² ≥ σ²(1/(Kε) − 1)/K`. For 20 devices and `ε = 2e-3` that is `1.2 σ²`;
/// five devices reach the same requirement at `ε = 1/35`.
pub const DESK_EPSILON: f64 = 1.0 / 35.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("mission duration {duration} s is not a multiple of the slot length {delta} s")]
    SlotMismatch { duration: f64, delta: f64 },
    #[error("invalid generator argument: {0}")]
    InvalidArgument(String),
}

impl From<serde_json::Error> for ScenarioError {
    fn from(err: serde_json::Error) -> Self {
        ScenarioError::Parse {
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}

/// Channel and mobility constants shared by every device and UAV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysParams {
    /// Channel power gain at 1 m (linear).
    #[serde(deserialize_with = "linear_quantity")]
    pub beta0: f64,
    /// Path-loss exponent.
    pub gamma: f64,
    /// Receiver noise power in watts.
    #[serde(deserialize_with = "linear_quantity")]
    pub sigma2: f64,
    /// Flight altitude in meters.
    #[serde(rename = "H")]
    pub altitude: f64,
    pub vmax: f64,
    pub dmin: f64,
    /// Slot length in seconds.
    pub delta: f64,
    /// Mission duration in seconds.
    #[serde(rename = "T")]
    pub duration: f64,
}

impl PhysParams {
    pub fn paper(duration: f64) -> Self {
        PhysParams {
            beta0: db_to_linear(-50.0),
            gamma: 2.0,
            sigma2: dbm_to_watts(-80.0),
            altitude: 100.0,
            vmax: 30.0,
            dmin: 100.0,
            delta: PAPER_DELTA,
            duration,
        }
    }

    /// Number of slots `N = T/δ`, or `None` when `T` is not a whole number of
    /// slots (within 1e-9).
    pub fn slot_count(&self) -> Option<usize> {
        if !(self.delta > 0.0) || !(self.duration > 0.0) {
            return None;
        }
        let ratio = self.duration / self.delta;
        let rounded = ratio.round();
        if (ratio - rounded).abs() > 1e-9 || rounded < 1.0 {
            None
        } else {
            Some(rounded as usize)
        }
    }

    /// Distance a UAV may cover within one slot.
    pub fn max_step(&self) -> f64 {
        self.vmax * self.delta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub position: Point,
    /// Total transmit energy budget over the mission, in watts summed over slots.
    pub power_budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: usize,
    pub devices: Vec<DeviceSpec>,
    /// Target AirComp MSE.
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub phys: PhysParams,
    pub clusters: Vec<Cluster>,
    pub num_uavs: usize,
    pub rng_seed: u64,
}

/// One failed invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

impl Scenario {
    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn num_devices(&self) -> usize {
        self.clusters.iter().map(|c| c.devices.len()).sum()
    }

    /// Slot count; panics if the scenario failed validation.
    pub fn num_slots(&self) -> usize {
        self.phys
            .slot_count()
            .expect("scenario duration must be a whole number of slots")
    }

    /// Global device index range of each cluster, in cluster order.
    pub fn cluster_ranges(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.clusters
            .iter()
            .map(|c| {
                let r = start..start + c.devices.len();
                start = r.end;
                r
            })
            .collect()
    }

    /// Cluster index of every device.
    pub fn device_clusters(&self) -> Vec<usize> {
        self.clusters
            .iter()
            .enumerate()
            .flat_map(|(l, c)| std::iter::repeat_n(l, c.devices.len()))
            .collect()
    }

    pub fn devices(&self) -> impl Iterator<Item = &DeviceSpec> {
        self.clusters.iter().flat_map(|c| c.devices.iter())
    }

    pub fn device_positions(&self) -> Vec<Point> {
        self.devices().map(|d| d.position).collect()
    }

    pub fn power_budgets(&self) -> Vec<f64> {
        self.devices().map(|d| d.power_budget).collect()
    }

    pub fn cluster_centroid(&self, l: usize) -> Point {
        centroid(self.clusters[l].devices.iter().map(|d| d.position))
    }

    /// `⌊M·N/L⌋`, the task count reachable with unlimited power and no
    /// interference.
    pub fn max_task_count(&self) -> usize {
        self.num_uavs * self.num_slots() / self.num_clusters().max(1)
    }

    /// Same scenario with every device budget replaced by `budget`.
    pub fn with_power_budget(&self, budget: f64) -> Scenario {
        let mut s = self.clone();
        for c in &mut s.clusters {
            for d in &mut c.devices {
                d.power_budget = budget;
            }
        }
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Scenario::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Scenario, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| ScenarioError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

pub fn centroid(points: impl IntoIterator<Item = Point>) -> Point {
    let mut sum = [0.0, 0.0];
    let mut count = 0usize;
    for p in points {
        sum[0] += p[0];
        sum[1] += p[1];
        count += 1;
    }
    if count == 0 {
        return sum;
    }
    [sum[0] / count as f64, sum[1] / count as f64]
}

/// Checks every scenario invariant; returns one entry per violation.
pub fn validate(scenario: &Scenario) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |subject: String, message: String| out.push(Violation { subject, message });
    let p = &scenario.phys;

    let positive = [
        ("beta0", p.beta0),
        ("sigma2", p.sigma2),
        ("H", p.altitude),
        ("vmax", p.vmax),
        ("delta", p.delta),
        ("T", p.duration),
    ];
    for (name, value) in positive {
        if !(value > 0.0 && value.is_finite()) {
            push(format!("phys.{name}"), format!("must be positive, got {value}"));
        }
    }
    if !(p.gamma >= 2.0 && p.gamma.is_finite()) {
        push("phys.gamma".into(), format!("path-loss exponent must be >= 2, got {}", p.gamma));
    }
    if !(p.dmin >= 0.0 && p.dmin.is_finite()) {
        push("phys.dmin".into(), format!("must be non-negative, got {}", p.dmin));
    }
    if p.delta > 0.0 && p.duration > 0.0 && p.slot_count().is_none() {
        push(
            "phys.T".into(),
            format!("{} s is not a whole number of {} s slots", p.duration, p.delta),
        );
    }

    let l = scenario.clusters.len();
    if l == 0 {
        push("clusters".into(), "at least one cluster is required".into());
    }
    if scenario.num_uavs < 1 || scenario.num_uavs > l {
        push(
            "num_uavs".into(),
            format!("need 1 <= M <= L = {l}, got M = {}", scenario.num_uavs),
        );
    }
    for (idx, c) in scenario.clusters.iter().enumerate() {
        let subject = format!("cluster {}", idx + 1);
        if c.devices.is_empty() {
            push(subject.clone(), "has no devices".into());
        }
        if !(c.epsilon > 0.0 && c.epsilon < 1.0) {
            push(subject.clone(), format!("target MSE must lie in (0, 1), got {}", c.epsilon));
        }
        for (k, d) in c.devices.iter().enumerate() {
            if !(d.power_budget > 0.0 && d.power_budget.is_finite()) {
                push(
                    format!("{subject} device {}", k + 1),
                    format!("power budget must be positive, got {}", d.power_budget),
                );
            }
            if !(d.position[0].is_finite() && d.position[1].is_finite()) {
                push(format!("{subject} device {}", k + 1), "position is not finite".into());
            }
        }
    }
    out
}

/// Devices drawn uniformly by area inside discs around the given centers.
pub struct ClusteredLayout<'a> {
    pub centers: &'a [Point],
    pub devices_per_cluster: usize,
    pub radius: f64,
    pub epsilon: f64,
}

pub fn generate_clustered(
    layout: &ClusteredLayout<'_>,
    phys: PhysParams,
    num_uavs: usize,
    power_budget: f64,
    seed: u64,
) -> Result<Scenario, ScenarioError> {
    if phys.slot_count().is_none() {
        return Err(ScenarioError::SlotMismatch {
            duration: phys.duration,
            delta: phys.delta,
        });
    }
    if num_uavs == 0 || num_uavs > layout.centers.len() {
        return Err(ScenarioError::InvalidArgument(format!(
            "UAV count {num_uavs} must lie in 1..={}",
            layout.centers.len()
        )));
    }
    if !(power_budget > 0.0) {
        return Err(ScenarioError::InvalidArgument(format!(
            "power budget must be positive, got {power_budget}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clusters = layout
        .centers
        .iter()
        .enumerate()
        .map(|(l, &center)| {
            let devices = (0..layout.devices_per_cluster)
                .map(|_| {
                    let u: f64 = rng.random();
                    let v: f64 = rng.random();
                    let r = layout.radius * u.sqrt();
                    let a = 2.0 * PI * v;
                    DeviceSpec {
                        position: [center[0] + r * a.cos(), center[1] + r * a.sin()],
                        power_budget,
                    }
                })
                .collect();
            Cluster {
                id: l + 1,
                devices,
                epsilon: layout.epsilon,
            }
        })
        .collect();
    Ok(Scenario {
        phys,
        clusters,
        num_uavs,
        rng_seed: seed,
    })
}

/// Six clusters of twenty devices with the full-scale physical constants.
pub fn generate_paper_scenario(
    duration: f64,
    num_uavs: usize,
    power_budget: f64,
    seed: u64,
) -> Result<Scenario, ScenarioError> {
    let layout = ClusteredLayout {
        centers: &PAPER_CENTERS,
        devices_per_cluster: PAPER_DEVICES_PER_CLUSTER,
        radius: PLACEMENT_RADIUS,
        epsilon: PAPER_EPSILON,
    };
    generate_clustered(&layout, PhysParams::paper(duration), num_uavs, power_budget, seed)
}

/// Reduced instance: the first three cluster centers with five devices each.
pub fn generate_desk_scenario(
    duration: f64,
    num_uavs: usize,
    power_budget: f64,
    seed: u64,
) -> Result<Scenario, ScenarioError> {
    let layout = ClusteredLayout {
        centers: &PAPER_CENTERS[..3],
        devices_per_cluster: DESK_DEVICES_PER_CLUSTER,
        radius: PLACEMENT_RADIUS,
        epsilon: DESK_EPSILON,
    };
    generate_clustered(&layout, PhysParams::paper(duration), num_uavs, power_budget, seed)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) * 1e-3
}

/// Parses `"-50 dB"`, `"-80 dBm"` or a plain number into a linear value.
pub fn parse_quantity(text: &str) -> Option<f64> {
    let t = text.trim().replace('\u{2212}', "-");
    let (number, convert): (&str, fn(f64) -> f64) = if let Some(n) = t.strip_suffix("dBm") {
        (n, dbm_to_watts)
    } else if let Some(n) = t.strip_suffix("dB") {
        (n, db_to_linear)
    } else {
        (t.as_str(), |x| x)
    };
    number.trim().parse::<f64>().ok().map(convert)
}

fn linear_quantity<'de, D: Deserializer<'de>>(de: D) -> Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Number(f64),
        Text(String),
    }
    match Raw::deserialize(de)? {
        Raw::Number(x) => Ok(x),
        Raw::Text(s) => parse_quantity(&s).ok_or_else(|| {
            serde::de::Error::custom(format!("cannot parse quantity {s:?}; expected a number or \"<x> dB\"/\"<x> dBm\""))
        }),
    }
}
