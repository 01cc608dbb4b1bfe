//! Receive normalizing factors.

use serde::{Deserialize, Serialize};

use crate::channel::{interference, max_ratio, ChannelGains};
use crate::power::PowerPlan;
use crate::scenario::Scenario;
use crate::scheduling::Assignment;

/// `η_{l,m}[n]`, indexed `(l * M + m) * N + n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizers {
    num_uavs: usize,
    num_slots: usize,
    values: Vec<f64>,
}

impl Normalizers {
    pub fn zeros(num_clusters: usize, num_uavs: usize, num_slots: usize) -> Self {
        Normalizers {
            num_uavs,
            num_slots,
            values: vec![0.0; num_clusters * num_uavs * num_slots],
        }
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize, n: usize) -> f64 {
        self.values[(l * self.num_uavs + m) * self.num_slots + n]
    }

    pub fn set(&mut self, l: usize, m: usize, n: usize, v: f64) {
        self.values[(l * self.num_uavs + m) * self.num_slots + n] = v;
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Minimizer over `η ≥ 0` of the MSE of cluster `l` at UAV `m` in slot `n`.
#[allow(clippy::too_many_arguments)]
pub fn eta_for_triple(
    scenario: &Scenario,
    cluster_of: &[usize],
    range: std::ops::Range<usize>,
    l: usize,
    m: usize,
    n: usize,
    power: &PowerPlan,
    gains: &ChannelGains,
) -> f64 {
    let mut num = 0.0;
    let mut den = scenario.phys.sigma2 + interference(cluster_of, l, m, n, power, gains);
    for k in range {
        let p = power.get(k, n);
        num += p.sqrt() * gains.magnitude(k, m, n);
        den += p * gains.power_gain(k, m, n);
    }
    if num > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Closed-form optimal normalizers for the scheduled triples; zero elsewhere.
pub fn optimal_eta(scenario: &Scenario, assignment: &Assignment, power: &PowerPlan, gains: &ChannelGains) -> Normalizers {
    let ranges = scenario.cluster_ranges();
    let cluster_of = scenario.device_clusters();
    let mut eta = Normalizers::zeros(scenario.num_clusters(), scenario.num_uavs, scenario.num_slots());
    for (l, m, n) in assignment.triples() {
        let v = eta_for_triple(scenario, &cluster_of, ranges[l].clone(), l, m, n, power, gains);
        eta.set(l, m, n, v);
    }
    eta
}

/// Max MSE-to-target ratio over the scheduled (cluster, slot) pairs.
pub fn eta_gamma(
    scenario: &Scenario,
    assignment: &Assignment,
    power: &PowerPlan,
    eta: &Normalizers,
    gains: &ChannelGains,
) -> f64 {
    max_ratio(scenario, assignment, eta, power, gains)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gains, mse_triple};
    use crate::scenario::{Cluster, DeviceSpec, PhysParams};
    use crate::trajectory::TrajectorySet;

    fn two_cluster() -> Scenario {
        let dev = |x: f64| DeviceSpec {
            position: [x, 0.0],
            power_budget: 1.0,
        };
        Scenario {
            phys: PhysParams::paper(1.0),
            clusters: vec![
                Cluster {
                    id: 1,
                    devices: vec![dev(0.0), dev(20.0)],
                    epsilon: 0.1,
                },
                Cluster {
                    id: 2,
                    devices: vec![dev(300.0)],
                    epsilon: 0.1,
                },
            ],
            num_uavs: 1,
            rng_seed: 0,
        }
    }

    #[test]
    fn single_device_value() {
        let s = Scenario {
            clusters: vec![Cluster {
                id: 1,
                devices: vec![DeviceSpec {
                    position: [0.0, 0.0],
                    power_budget: 1.0,
                }],
                epsilon: 0.5,
            }],
            ..two_cluster()
        };
        let g = gains(&s, &TrajectorySet::hover(&[[0.0, 0.0]], 2)).unwrap();
        let mut a = Assignment::for_scenario(&s);
        a.set(0, 0, 0, true);
        let mut p = PowerPlan::zeros(1, 2);
        p.set(0, 0, 0.1);
        let eta = optimal_eta(&s, &a, &p, &g);
        assert!((eta.get(0, 0, 0) - 9.0909e4).abs() / 9.0909e4 < 1e-4);
        assert_eq!(eta.get(0, 0, 1), 0.0);
        let gamma = eta_gamma(&s, &a, &p, &eta, &g);
        assert!((gamma - 0.090909 / 0.5).abs() < 1e-5);
    }

    #[test]
    fn zero_power_gives_zero_eta() {
        let s = two_cluster();
        let g = gains(&s, &TrajectorySet::hover(&[[0.0, 0.0]], 2)).unwrap();
        let mut a = Assignment::for_scenario(&s);
        a.set(0, 0, 0, true);
        let p = PowerPlan::zeros(3, 2);
        let eta = optimal_eta(&s, &a, &p, &g);
        assert_eq!(eta.get(0, 0, 0), 0.0);
        // Each device contributes (0 − 1)²; K_l / K_l² / ε.
        assert!((eta_gamma(&s, &a, &p, &eta, &g) - 0.5 / 0.1).abs() < 1e-12);
        assert_eq!(eta_gamma(&s, &Assignment::for_scenario(&s), &p, &eta, &g), 0.0);
    }

    #[test]
    fn first_order_optimality() {
        let s = two_cluster();
        let g = gains(&s, &TrajectorySet::hover(&[[10.0, 5.0]], 2)).unwrap();
        let mut p = PowerPlan::zeros(3, 2);
        p.set(0, 0, 0.03);
        p.set(1, 0, 0.05);
        p.set(2, 0, 0.2);
        let cluster_of = s.device_clusters();
        let e = eta_for_triple(&s, &cluster_of, 0..2, 0, 0, 0, &p, &g);
        let f = |eta: f64| mse_triple(&s, 0, 0, 0, eta, &p, &g).total;
        let best = f(e);
        for t in [1.0 - 1e-3, 1.0 + 1e-3] {
            assert!(f(e * t) >= best);
        }
        for i in 0..200 {
            assert!(f(e * i as f64 / 100.0) >= best - 1e-15);
        }
    }

    #[test]
    fn more_noise_or_interference_lowers_eta() {
        let s = two_cluster();
        let g = gains(&s, &TrajectorySet::hover(&[[0.0, 0.0]], 2)).unwrap();
        let cluster_of = s.device_clusters();
        let mut p = PowerPlan::zeros(3, 2);
        p.set(0, 0, 0.1);
        p.set(1, 0, 0.1);
        p.set(2, 0, 0.1);
        let base = eta_for_triple(&s, &cluster_of, 0..2, 0, 0, 0, &p, &g);
        let mut p2 = p.clone();
        p2.set(2, 0, 0.5);
        assert!(eta_for_triple(&s, &cluster_of, 0..2, 0, 0, 0, &p2, &g) < base);
        let mut noisy = s.clone();
        noisy.phys.sigma2 *= 2.0;
        assert!(eta_for_triple(&noisy, &cluster_of, 0..2, 0, 0, 0, &p, &g) < base);
    }
}
