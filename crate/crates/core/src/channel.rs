//! Line-of-sight channel gains and the per-slot AirComp mean-squared error.
//!
//! The model works with channel magnitudes only: once every device pre-rotates
//! its symbol by the conjugate channel phase and the receive scaling is real
//! and non-negative, the MSE depends on `|h|`, the transmit powers and `η`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::normalizing::Normalizers;
use crate::power::PowerPlan;
use crate::scenario::{squared_distance, Scenario};
use crate::scheduling::Assignment;
use crate::trajectory::TrajectorySet;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("{what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("negative {what} at index {index}: {value}")]
    Negative {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("at least one Monte-Carlo draw is required")]
    NoDraws,
}

/// Dense per-(device, UAV, slot) channel magnitudes and distances.
#[derive(Debug, Clone)]
pub struct ChannelGains {
    num_uavs: usize,
    num_slots: usize,
    magnitude: Vec<f64>,
    distance: Vec<f64>,
}

impl ChannelGains {
    #[inline]
    fn idx(&self, k: usize, m: usize, n: usize) -> usize {
        (k * self.num_uavs + m) * self.num_slots + n
    }

    /// `|h_{k,m}[n]|`.
    #[inline]
    pub fn magnitude(&self, k: usize, m: usize, n: usize) -> f64 {
        self.magnitude[self.idx(k, m, n)]
    }

    /// `|h_{k,m}[n]|²`.
    #[inline]
    pub fn power_gain(&self, k: usize, m: usize, n: usize) -> f64 {
        let h = self.magnitude(k, m, n);
        h * h
    }

    pub fn distance(&self, k: usize, m: usize, n: usize) -> f64 {
        self.distance[self.idx(k, m, n)]
    }
}

pub fn gains(scenario: &Scenario, trajectories: &TrajectorySet) -> Result<ChannelGains, ChannelError> {
    let n_slots = scenario.num_slots();
    let m_uavs = scenario.num_uavs;
    if trajectories.num_uavs() != m_uavs {
        return Err(ChannelError::DimensionMismatch {
            what: "trajectory UAV count",
            expected: m_uavs,
            got: trajectories.num_uavs(),
        });
    }
    if trajectories.num_slots() != n_slots {
        return Err(ChannelError::DimensionMismatch {
            what: "trajectory slot count",
            expected: n_slots,
            got: trajectories.num_slots(),
        });
    }
    let phys = &scenario.phys;
    let h2 = phys.altitude * phys.altitude;
    let positions = scenario.device_positions();
    let total = positions.len() * m_uavs * n_slots;
    let mut magnitude = Vec::with_capacity(total);
    let mut distance = Vec::with_capacity(total);
    for w in &positions {
        for m in 0..m_uavs {
            for n in 0..n_slots {
                let d2 = h2 + squared_distance(trajectories.position(m, n), *w);
                distance.push(d2.sqrt());
                magnitude.push((phys.beta0 * d2.powf(-phys.gamma / 2.0)).sqrt());
            }
        }
    }
    Ok(ChannelGains {
        num_uavs: m_uavs,
        num_slots: n_slots,
        magnitude,
        distance,
    })
}

/// The three additive error sources of one slot's estimate.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MseBreakdown {
    pub misalignment: f64,
    pub interference: f64,
    pub noise: f64,
    pub total: f64,
}

impl MseBreakdown {
    fn add(&mut self, other: &MseBreakdown) {
        self.misalignment += other.misalignment;
        self.interference += other.interference;
        self.noise += other.noise;
        self.total += other.total;
    }
}

/// Received interference at UAV `m` in slot `n` from every device outside
/// cluster `l`: `Σ_{j≠l} Σ_{i∈K_j} p_i |h_{i,m}|²`.
pub fn interference(
    cluster_of: &[usize],
    l: usize,
    m: usize,
    n: usize,
    power: &PowerPlan,
    gains: &ChannelGains,
) -> f64 {
    cluster_of
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c != l)
        .map(|(i, _)| power.get(i, n) * gains.power_gain(i, m, n))
        .sum()
}

/// MSE of cluster `l` at UAV `m` in slot `n` with scaling `eta`, as if the
/// pair were associated.
pub fn mse_triple(
    scenario: &Scenario,
    l: usize,
    m: usize,
    n: usize,
    eta: f64,
    power: &PowerPlan,
    gains: &ChannelGains,
) -> MseBreakdown {
    let ranges = scenario.cluster_ranges();
    let cluster_of = scenario.device_clusters();
    mse_triple_with(scenario, &ranges, &cluster_of, l, m, n, eta, power, gains)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn mse_triple_with(
    scenario: &Scenario,
    ranges: &[std::ops::Range<usize>],
    cluster_of: &[usize],
    l: usize,
    m: usize,
    n: usize,
    eta: f64,
    power: &PowerPlan,
    gains: &ChannelGains,
) -> MseBreakdown {
    let k_l = ranges[l].len() as f64;
    let norm = 1.0 / (k_l * k_l);
    let misalignment: f64 = ranges[l]
        .clone()
        .map(|k| {
            let e = eta * gains.magnitude(k, m, n) * power.get(k, n).sqrt() - 1.0;
            e * e
        })
        .sum::<f64>()
        * norm;
    let interference = eta * eta * interference(cluster_of, l, m, n, power, gains) * norm;
    let noise = eta * eta * scenario.phys.sigma2 * norm;
    MseBreakdown {
        misalignment,
        interference,
        noise,
        total: misalignment + interference + noise,
    }
}

fn check_inputs(
    scenario: &Scenario,
    assignment: &Assignment,
    eta: &Normalizers,
    power: &PowerPlan,
) -> Result<(), ChannelError> {
    let (l, m, n) = (scenario.num_clusters(), scenario.num_uavs, scenario.num_slots());
    let dims = [
        ("assignment shape", l * m * n, assignment.len()),
        ("normalizer shape", l * m * n, eta.len()),
        ("power plan shape", scenario.num_devices() * n, power.len()),
    ];
    for (what, expected, got) in dims {
        if expected != got {
            return Err(ChannelError::DimensionMismatch { what, expected, got });
        }
    }
    if let Some((index, &value)) = eta.values().iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(ChannelError::Negative {
            what: "normalizing factor",
            index,
            value,
        });
    }
    if let Some((index, &value)) = power.values().iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(ChannelError::Negative {
            what: "transmit power",
            index,
            value,
        });
    }
    Ok(())
}

/// Achievable MSE of cluster `l` in slot `n`; all zero when the cluster is
/// not scheduled.
pub fn mse_analytic(
    scenario: &Scenario,
    l: usize,
    n: usize,
    assignment: &Assignment,
    eta: &Normalizers,
    power: &PowerPlan,
    gains: &ChannelGains,
) -> Result<MseBreakdown, ChannelError> {
    check_inputs(scenario, assignment, eta, power)?;
    let ranges = scenario.cluster_ranges();
    let cluster_of = scenario.device_clusters();
    let mut total = MseBreakdown::default();
    for m in 0..scenario.num_uavs {
        if assignment.get(l, m, n) {
            let b = mse_triple_with(scenario, &ranges, &cluster_of, l, m, n, eta.get(l, m, n), power, gains);
            total.add(&b);
        }
    }
    Ok(total)
}

/// `max_{l,n} MSE_{l,n}/ε_l`, zero when nothing is scheduled.
pub fn max_ratio(
    scenario: &Scenario,
    assignment: &Assignment,
    eta: &Normalizers,
    power: &PowerPlan,
    gains: &ChannelGains,
) -> f64 {
    let ranges = scenario.cluster_ranges();
    let cluster_of = scenario.device_clusters();
    assignment
        .triples()
        .map(|(l, m, n)| {
            let b = mse_triple_with(scenario, &ranges, &cluster_of, l, m, n, eta.get(l, m, n), power, gains);
            b.total / scenario.clusters[l].epsilon
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

/// Simulates the received superposition and estimates
/// `E|η·y/K_l − (1/K_l)Σ s_k|²` for cluster `l` in slot `n`.
///
/// Symbols and noise are real Gaussian draws; only their first two moments
/// enter the analytic expression.
#[allow(clippy::too_many_arguments)]
pub fn mse_montecarlo(
    scenario: &Scenario,
    l: usize,
    n: usize,
    assignment: &Assignment,
    eta: &Normalizers,
    power: &PowerPlan,
    gains: &ChannelGains,
    draws: usize,
    seed: u64,
) -> Result<MonteCarloEstimate, ChannelError> {
    check_inputs(scenario, assignment, eta, power)?;
    if draws == 0 {
        return Err(ChannelError::NoDraws);
    }
    let Some(m) = (0..scenario.num_uavs).find(|&m| assignment.get(l, m, n)) else {
        return Ok(MonteCarloEstimate {
            mean: 0.0,
            std_error: 0.0,
            draws,
        });
    };
    let ranges = scenario.cluster_ranges();
    let k_l = ranges[l].len() as f64;
    let cluster_of = scenario.device_clusters();
    let e = eta.get(l, m, n);
    let noise_std = scenario.phys.sigma2.sqrt();
    // Only devices that transmit in this slot contribute to y.
    let amplitude: Vec<(usize, f64)> = (0..cluster_of.len())
        .map(|k| (k, power.get(k, n).sqrt() * gains.magnitude(k, m, n)))
        .filter(|&(k, a)| a > 0.0 || cluster_of[k] == l)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..draws {
        let mut received = 0.0;
        let mut target = 0.0;
        for &(k, a) in &amplitude {
            let s: f64 = StandardNormal.sample(&mut rng);
            received += a * s;
            if cluster_of[k] == l {
                target += s;
            }
        }
        let noise: f64 = StandardNormal.sample(&mut rng);
        received += noise_std * noise;
        let err = (e * received - target) / k_l;
        let v = err * err;
        sum += v;
        sum_sq += v * v;
    }
    let count = draws as f64;
    let mean = sum / count;
    let var = if draws > 1 {
        ((sum_sq - count * mean * mean) / (count - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(MonteCarloEstimate {
        mean,
        std_error: (var / count).sqrt(),
        draws,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Cluster, DeviceSpec, PhysParams};

    pub(crate) fn single_device(sigma2: f64) -> Scenario {
        Scenario {
            phys: PhysParams {
                sigma2,
                duration: 0.5,
                ..PhysParams::paper(0.5)
            },
            clusters: vec![Cluster {
                id: 1,
                devices: vec![DeviceSpec {
                    position: [0.0, 0.0],
                    power_budget: 1.0,
                }],
                epsilon: 0.5,
            }],
            num_uavs: 1,
            rng_seed: 0,
        }
    }

    #[test]
    fn overhead_gain() {
        let s = single_device(1e-11);
        let q = TrajectorySet::hover(&[[0.0, 0.0]], 1);
        let g = gains(&s, &q).unwrap();
        assert!((g.power_gain(0, 0, 0) - 1e-9).abs() < 1e-22);
        assert!((g.magnitude(0, 0, 0) - 3.16227766e-5).abs() < 1e-12);
        assert!((g.distance(0, 0, 0) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn slanted_distance() {
        let s = single_device(1e-11);
        let q = TrajectorySet::hover(&[[30.0, 40.0]], 1);
        let g = gains(&s, &q).unwrap();
        assert!((g.distance(0, 0, 0) - 111.80339887).abs() < 1e-7);
    }

    #[test]
    fn gain_decreases_with_distance() {
        let s = single_device(1e-11);
        let mut last = f64::INFINITY;
        for r in [0.0, 10.0, 20.0, 40.0, 80.0, 160.0] {
            let g = gains(&s, &TrajectorySet::hover(&[[r, 0.0]], 1)).unwrap();
            assert!(g.magnitude(0, 0, 0) <= last);
            last = g.magnitude(0, 0, 0);
        }
    }

    #[test]
    fn single_device_optimum() {
        let s = single_device(1e-11);
        let g = gains(&s, &TrajectorySet::hover(&[[0.0, 0.0]], 1)).unwrap();
        let mut a = Assignment::new(1, 1, 1);
        a.set(0, 0, 0, true);
        let mut p = PowerPlan::zeros(1, 1);
        p.set(0, 0, 0.1);
        let h = g.magnitude(0, 0, 0);
        let eta_v = 0.1f64.sqrt() * h / (0.1 * h * h + 1e-11);
        assert!((eta_v - 9.0909e4).abs() / 9.0909e4 < 1e-4);
        let mut eta = Normalizers::zeros(1, 1, 1);
        eta.set(0, 0, 0, eta_v);
        let b = mse_analytic(&s, 0, 0, &a, &eta, &p, &g).unwrap();
        assert!((b.total - 1e-11 / (0.1 * 1e-9 + 1e-11)).abs() < 1e-12);
        assert!((b.total - 0.090909).abs() < 1e-6);
        assert_eq!(b.interference, 0.0);
    }

    #[test]
    fn unscheduled_cluster_has_zero_mse() {
        let s = single_device(1e-11);
        let g = gains(&s, &TrajectorySet::hover(&[[0.0, 0.0]], 1)).unwrap();
        let a = Assignment::new(1, 1, 1);
        let mut eta = Normalizers::zeros(1, 1, 1);
        eta.set(0, 0, 0, 3.0);
        let b = mse_analytic(&s, 0, 0, &a, &eta, &PowerPlan::zeros(1, 1), &g).unwrap();
        assert_eq!(b, MseBreakdown::default());
    }

    #[test]
    fn negative_inputs_rejected() {
        let s = single_device(1e-11);
        let g = gains(&s, &TrajectorySet::hover(&[[0.0, 0.0]], 1)).unwrap();
        let a = Assignment::new(1, 1, 1);
        let mut eta = Normalizers::zeros(1, 1, 1);
        eta.set(0, 0, 0, -1.0);
        assert!(matches!(
            mse_analytic(&s, 0, 0, &a, &eta, &PowerPlan::zeros(1, 1), &g),
            Err(ChannelError::Negative { .. })
        ));
    }

    #[test]
    fn perfect_alignment_without_noise_is_exact() {
        let s = single_device(0.0);
        let g = gains(&s, &TrajectorySet::hover(&[[0.0, 0.0]], 1)).unwrap();
        let mut a = Assignment::new(1, 1, 1);
        a.set(0, 0, 0, true);
        let mut p = PowerPlan::zeros(1, 1);
        p.set(0, 0, 0.25);
        let mut eta = Normalizers::zeros(1, 1, 1);
        // η |h| √p = 1 exactly: √p = 0.5 and |h| enters through η.
        eta.set(0, 0, 0, 2.0 / g.magnitude(0, 0, 0));
        let est = mse_montecarlo(&s, 0, 0, &a, &eta, &p, &g, 1000, 3).unwrap();
        assert!(est.mean < 1e-28, "{}", est.mean);
    }

    #[test]
    fn zero_draws_rejected() {
        let s = single_device(1e-11);
        let g = gains(&s, &TrajectorySet::hover(&[[0.0, 0.0]], 1)).unwrap();
        let a = Assignment::new(1, 1, 1);
        let eta = Normalizers::zeros(1, 1, 1);
        assert_eq!(
            mse_montecarlo(&s, 0, 0, &a, &eta, &PowerPlan::zeros(1, 1), &g, 0, 1),
            Err(ChannelError::NoDraws)
        );
    }

    #[test]
    fn trajectory_shape_mismatch() {
        let s = single_device(1e-11);
        let q = TrajectorySet::hover(&[[0.0, 0.0]], 3);
        assert!(matches!(gains(&s, &q), Err(ChannelError::DimensionMismatch { .. })));
    }
}
