//! Stand-alone feasibility check of a plan against the original problem.
//!
//! Deliberately re-derives channel gains and MSE values from the scenario
//! rather than calling into the solver modules.

use serde::{Deserialize, Serialize};

use crate::normalizing::Normalizers;
use crate::orchestrator::SolveOutcome;
use crate::power::PowerPlan;
use crate::scenario::Scenario;
use crate::scheduling::{Assignment, SlotRule};
use crate::trajectory::TrajectorySet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Relative slack on `MSE ≤ ε`.
    pub mse_rel: f64,
    /// Relative slack on power budgets.
    pub budget_rel: f64,
    /// Absolute slack in meters on speed and separation.
    pub distance_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            mse_rel: 1e-6,
            budget_rel: 1e-9,
            distance_abs: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub violations: Vec<String>,
    /// Largest `MSE/ε` over scheduled (cluster, slot) pairs.
    pub worst_mse_ratio: f64,
    pub min_task_count: usize,
}

impl Report {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub struct Plan<'a> {
    pub assignment: &'a Assignment,
    pub power: &'a PowerPlan,
    pub eta: &'a Normalizers,
    pub trajectories: &'a TrajectorySet,
}

fn gain2(scenario: &Scenario, q: [f64; 2], w: [f64; 2]) -> f64 {
    let phys = &scenario.phys;
    let dx = q[0] - w[0];
    let dy = q[1] - w[1];
    let d2 = phys.altitude * phys.altitude + dx * dx + dy * dy;
    phys.beta0 * d2.powf(-phys.gamma / 2.0)
}

/// Checks every constraint of the original problem for a plan that claims
/// `d` tasks per cluster.
pub fn verify(scenario: &Scenario, plan: &Plan<'_>, d: usize, rule: SlotRule, tol: &Tolerances) -> Report {
    let mut v = Vec::new();
    let ll = scenario.clusters.len();
    let mm = scenario.num_uavs;
    let nn = scenario.num_slots();
    let kk: usize = scenario.clusters.iter().map(|c| c.devices.len()).sum();

    let shapes = [
        ("assignment", plan.assignment.len(), ll * mm * nn),
        ("normalizers", plan.eta.len(), ll * mm * nn),
        ("power plan", plan.power.len(), kk * nn),
        ("trajectory UAVs", plan.trajectories.num_uavs(), mm),
        ("trajectory slots", plan.trajectories.num_slots(), nn),
    ];
    let mut bad_shape = false;
    for (what, got, want) in shapes {
        if got != want {
            v.push(format!("{what} has size {got}, expected {want}"));
            bad_shape = true;
        }
    }
    if bad_shape {
        return Report {
            violations: v,
            worst_mse_ratio: f64::NAN,
            min_task_count: 0,
        };
    }
    let a = |l: usize, m: usize, n: usize| plan.assignment.get(l, m, n);

    // Binary structure and task counts.
    let mut counts = vec![0usize; ll];
    for n in 0..nn {
        let mut in_slot = 0;
        for l in 0..ll {
            let served = (0..mm).filter(|&m| a(l, m, n)).count();
            if served > 1 {
                v.push(format!("cluster {} is served by {served} UAVs in slot {n}", l + 1));
            }
            counts[l] += served;
            in_slot += served;
        }
        for m in 0..mm {
            let load = (0..ll).filter(|&l| a(l, m, n)).count();
            if load > 1 {
                v.push(format!("UAV {} serves {load} clusters in slot {n}", m + 1));
            }
        }
        if rule == SlotRule::Orthogonal && in_slot > 1 {
            v.push(format!("slot {n} carries {in_slot} associations under orthogonal access"));
        }
    }
    for (l, &c) in counts.iter().enumerate() {
        if c < d {
            v.push(format!("cluster {} completes {c} tasks, fewer than {d}", l + 1));
        }
    }

    // Devices listed cluster by cluster.
    let mut owner = Vec::with_capacity(kk);
    let mut positions = Vec::with_capacity(kk);
    let mut budgets = Vec::with_capacity(kk);
    for (l, c) in scenario.clusters.iter().enumerate() {
        for dev in &c.devices {
            owner.push(l);
            positions.push(dev.position);
            budgets.push(dev.power_budget);
        }
    }

    for k in 0..kk {
        let l = owner[k];
        let mut used = 0.0;
        for n in 0..nn {
            let p = plan.power.get(k, n);
            if !(p >= 0.0) {
                v.push(format!("device {k} has power {p} in slot {n}"));
                continue;
            }
            if p > 0.0 && !(0..mm).any(|m| a(l, m, n)) {
                v.push(format!("device {k} transmits in slot {n} while its cluster is idle"));
            }
            used += p;
        }
        if used > budgets[k] * (1.0 + tol.budget_rel) {
            v.push(format!("device {k} spends {used:.6e} W, budget {:.6e} W", budgets[k]));
        }
    }

    let mut worst = 0.0f64;
    for l in 0..ll {
        let own: Vec<usize> = (0..kk).filter(|&k| owner[k] == l).collect();
        let size = own.len() as f64;
        let eps = scenario.clusters[l].epsilon;
        for m in 0..mm {
            for n in 0..nn {
                let e = plan.eta.get(l, m, n);
                if !(e >= 0.0) {
                    v.push(format!("normalizer ({}, {}, {n}) is {e}", l + 1, m + 1));
                    continue;
                }
                if !a(l, m, n) {
                    continue;
                }
                let q = plan.trajectories.position(m, n);
                let mut err = 0.0;
                let mut leak = 0.0;
                for k in 0..kk {
                    let p = plan.power.get(k, n);
                    let g2 = gain2(scenario, q, positions[k]);
                    if owner[k] == l {
                        let x = e * (g2 * p).sqrt() - 1.0;
                        err += x * x;
                    } else {
                        leak += p * g2;
                    }
                }
                let mse = (err + e * e * (leak + scenario.phys.sigma2)) / (size * size);
                worst = worst.max(mse / eps);
                if mse > eps * (1.0 + tol.mse_rel) {
                    v.push(format!(
                        "cluster {} at UAV {} slot {n}: MSE {mse:.6e} above target {eps:.6e}",
                        l + 1,
                        m + 1
                    ));
                }
            }
        }
    }

    let limit = scenario.phys.vmax * scenario.phys.delta;
    for m in 0..mm {
        let first = plan.trajectories.waypoint(m, 0);
        let last = plan.trajectories.waypoint(m, nn);
        if first != last {
            v.push(format!("UAV {} does not return to its start", m + 1));
        }
        for j in 1..=nn {
            let (p, q) = (plan.trajectories.waypoint(m, j - 1), plan.trajectories.waypoint(m, j));
            let step = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            if step > limit + tol.distance_abs {
                v.push(format!("UAV {} moves {step:.6} m into waypoint {j}, limit {limit:.6} m", m + 1));
            }
        }
    }
    let dmin = scenario.phys.dmin;
    for n in 0..nn {
        for m in 0..mm {
            for i in m + 1..mm {
                let (p, q) = (plan.trajectories.position(m, n), plan.trajectories.position(i, n));
                let gap = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
                if gap < dmin - tol.distance_abs {
                    v.push(format!("UAVs {} and {} are {gap:.6} m apart in slot {n}", m + 1, i + 1));
                }
            }
        }
    }

    Report {
        violations: v,
        worst_mse_ratio: worst,
        min_task_count: counts.into_iter().min().unwrap_or(0),
    }
}

/// Verifies the state carried by a bisection outcome.
pub fn verify_outcome(scenario: &Scenario, outcome: &SolveOutcome, rule: SlotRule, tol: &Tolerances) -> Report {
    let st = &outcome.state;
    let plan = Plan {
        assignment: &st.assignment,
        power: &st.power,
        eta: &st.eta,
        trajectories: &st.trajectories,
    };
    verify(scenario, &plan, outcome.d_star, rule, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate_desk_scenario;

    #[test]
    fn flags_each_kind_of_violation() {
        let s = generate_desk_scenario(1.0, 2, 0.8, 1).unwrap();
        let (ll, mm, nn) = (3, 2, 2);
        let mut a = Assignment::new(ll, mm, nn);
        a.set(0, 0, 0, true);
        a.set(1, 0, 0, true);
        let mut p = PowerPlan::zeros(15, nn);
        p.set(14, 1, 2.0);
        let eta = Normalizers::zeros(ll, mm, nn);
        let q = TrajectorySet::new(vec![vec![[0.0, 0.0], [100.0, 0.0]], vec![[10.0, 0.0], [300.0, 0.0]]]).unwrap();
        let plan = Plan {
            assignment: &a,
            power: &p,
            eta: &eta,
            trajectories: &q,
        };
        let r = verify(&s, &plan, 1, SlotRule::PerUav, &Tolerances::default());
        let text = r.violations.join("\n");
        for needle in ["serves 2 clusters", "fewer than 1", "while its cluster is idle", "budget", "above target", "moves", "apart"] {
            assert!(text.contains(needle), "missing '{needle}' in\n{text}");
        }
        assert!(!r.ok());
    }

    #[test]
    fn empty_plan_is_feasible_for_zero_tasks() {
        let s = generate_desk_scenario(1.0, 1, 0.8, 1).unwrap();
        let a = Assignment::for_scenario(&s);
        let p = PowerPlan::zeros(15, 2);
        let eta = Normalizers::zeros(3, 1, 2);
        let q = TrajectorySet::hover(&[[0.0, 0.0]], 2);
        let plan = Plan {
            assignment: &a,
            power: &p,
            eta: &eta,
            trajectories: &q,
        };
        let r = verify(&s, &plan, 0, SlotRule::PerUav, &Tolerances::default());
        assert!(r.ok(), "{:?}", r.violations);
        assert_eq!(r.worst_mse_ratio, 0.0);
    }
}
