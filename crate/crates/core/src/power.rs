//! Transmit power allocation for a fixed schedule, normalizers and
//! trajectories.
//!
//! Working in amplitudes `u = √p` turns every per-slot MSE constraint into a
//! separable convex quadratic, so the block is solved exactly by the barrier
//! method. Only (device, slot) pairs whose cluster is scheduled carry a
//! variable; every other power is zero.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{max_ratio, ChannelGains};
use crate::convex::{self, ConvexConstraint, ConvexError, ConvexProgram, SolveOptions, SolveStatus};
use crate::normalizing::Normalizers;
use crate::scenario::Scenario;
use crate::scheduling::Assignment;

/// `p_k[n]` in watts, indexed `k * N + n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerPlan {
    num_slots: usize,
    values: Vec<f64>,
}

impl PowerPlan {
    pub fn zeros(num_devices: usize, num_slots: usize) -> Self {
        PowerPlan {
            num_slots,
            values: vec![0.0; num_devices * num_slots],
        }
    }

    #[inline]
    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.values[k * self.num_slots + n]
    }

    pub fn set(&mut self, k: usize, n: usize, p: f64) {
        self.values[k * self.num_slots + n] = p;
    }

    /// Energy budget used by device `k` over the mission.
    pub fn total(&self, k: usize) -> f64 {
        self.values[k * self.num_slots..(k + 1) * self.num_slots].iter().sum()
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
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

/// `P_k / D` on every slot where device `k`'s cluster is scheduled.
pub fn equal_power(scenario: &Scenario, assignment: &Assignment, d: usize) -> PowerPlan {
    let n_slots = scenario.num_slots();
    let mut plan = PowerPlan::zeros(scenario.num_devices(), n_slots);
    if d == 0 {
        return plan;
    }
    for (l, range) in scenario.cluster_ranges().into_iter().enumerate() {
        for n in 0..n_slots {
            if assignment.cluster_active(l, n) {
                for k in range.clone() {
                    plan.set(k, n, scenario.clusters[l].devices[k - range.start].power_budget / d as f64);
                }
            }
        }
    }
    plan
}

#[derive(Debug, Error)]
pub enum PowerError {
    #[error(transparent)]
    Convex(#[from] ConvexError),
    #[error("power subproblem reported infeasible (phase-1 value {0:.3e})")]
    Infeasible(f64),
    #[error("power subproblem stopped at the iteration limit without a feasible point")]
    IterationLimit,
}

/// `Σ_i (½ d_i z_i² + b_i z_i) + c` over `z = x[vars]`.
#[derive(Debug, Clone)]
pub struct SeparableQuadratic {
    pub vars: Vec<usize>,
    pub diag: Vec<f64>,
    pub linear: Vec<f64>,
    pub constant: f64,
}

impl ConvexConstraint for SeparableQuadratic {
    fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for (i, &j) in self.vars.iter().enumerate() {
            let z = x[j];
            v += 0.5 * self.diag[i] * z * z + self.linear[i] * z;
        }
        v
    }

    fn gradient(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        for (i, &j) in self.vars.iter().enumerate() {
            out.push((j, self.diag[i] * x[j] + self.linear[i]));
        }
    }

    fn add_hessian(&self, _x: &[f64], scale: f64, hess: &mut DMatrix<f64>) {
        for (i, &j) in self.vars.iter().enumerate() {
            if self.diag[i] != 0.0 {
                hess[(j, j)] += scale * self.diag[i];
            }
        }
    }
}

/// The power block as a convex program over `(u, Γ)`.
pub struct PowerProgram {
    pub program: ConvexProgram,
    /// `(k, n)` for each amplitude variable; `Γ` is the last coordinate.
    pub vars: Vec<(usize, usize)>,
    /// Number of MSE-ratio constraints (one per scheduled triple).
    pub active_constraints: usize,
}

impl PowerProgram {
    pub fn gamma_index(&self) -> usize {
        self.vars.len()
    }

    /// Amplitude vector for `plan`, with `Γ` appended.
    pub fn point(&self, plan: &PowerPlan, gamma: f64) -> Vec<f64> {
        let mut x: Vec<f64> = self.vars.iter().map(|&(k, n)| plan.get(k, n).sqrt()).collect();
        x.push(gamma);
        x
    }

    pub fn plan(&self, x: &[f64], num_devices: usize, num_slots: usize) -> PowerPlan {
        let mut plan = PowerPlan::zeros(num_devices, num_slots);
        for (i, &(k, n)) in self.vars.iter().enumerate() {
            plan.set(k, n, x[i] * x[i]);
        }
        plan
    }
}

/// Builds `min Γ` subject to, for each scheduled `(l, m, n)`,
/// `[Σ_{k∈K_l}(θ_k u_k − 1)² + Σ_{i∉K_l} θ_i² u_i² + η²σ²] / (ε_l K_l²) ≤ Γ`
/// with `θ = η|h|`, and `Σ_n u_k[n]² ≤ P_k` (scaled by `1/P_k`).
pub fn build_power_program(
    scenario: &Scenario,
    assignment: &Assignment,
    eta: &Normalizers,
    gains: &ChannelGains,
) -> PowerProgram {
    let n_slots = scenario.num_slots();
    let ranges = scenario.cluster_ranges();
    let mut var_of = vec![usize::MAX; scenario.num_devices() * n_slots];
    let mut vars = Vec::new();
    for (k, &l) in scenario.device_clusters().iter().enumerate() {
        for n in 0..n_slots {
            if assignment.cluster_active(l, n) {
                var_of[k * n_slots + n] = vars.len();
                vars.push((k, n));
            }
        }
    }
    let g = vars.len();
    let mut objective = vec![0.0; g + 1];
    objective[g] = 1.0;
    let mut program = ConvexProgram::new(g + 1, objective);

    let mut active_constraints = 0;
    for (l, m, n) in assignment.triples() {
        let e = eta.get(l, m, n);
        let k_l = ranges[l].len() as f64;
        let scale = 1.0 / (scenario.clusters[l].epsilon * k_l * k_l);
        let mut c = SeparableQuadratic {
            vars: Vec::new(),
            diag: Vec::new(),
            linear: Vec::new(),
            constant: scale * (k_l + e * e * scenario.phys.sigma2),
        };
        for (j, range) in ranges.iter().enumerate() {
            let own = j == l;
            if !own && !assignment.cluster_active(j, n) {
                continue;
            }
            for k in range.clone() {
                let theta = e * gains.magnitude(k, m, n);
                c.vars.push(var_of[k * n_slots + n]);
                c.diag.push(2.0 * scale * theta * theta);
                c.linear.push(if own { -2.0 * scale * theta } else { 0.0 });
            }
        }
        c.vars.push(g);
        c.diag.push(0.0);
        c.linear.push(-1.0);
        program.push(c);
        active_constraints += 1;
    }

    let budgets = scenario.power_budgets();
    for (k, &budget) in budgets.iter().enumerate() {
        let own: Vec<usize> = (0..n_slots)
            .map(|n| var_of[k * n_slots + n])
            .filter(|&i| i != usize::MAX)
            .collect();
        if own.is_empty() {
            continue;
        }
        let len = own.len();
        program.push(SeparableQuadratic {
            vars: own,
            diag: vec![2.0 / budget; len],
            linear: vec![0.0; len],
            constant: -1.0,
        });
    }
    PowerProgram {
        program,
        vars,
        active_constraints,
    }
}

#[derive(Debug, Clone)]
pub struct PowerOutcome {
    pub plan: PowerPlan,
    /// Max MSE ratio recomputed from `plan`.
    pub gamma: f64,
    /// The solver's `Γ` variable at termination.
    pub solver_gamma: f64,
    pub status: SolveStatus,
    pub newton_iterations: usize,
}

/// Scales `plan` so every device uses at most `fraction` of its budget.
fn shrink_to_budget(scenario: &Scenario, plan: &PowerPlan, fraction: f64) -> PowerPlan {
    let mut out = plan.clone();
    for (k, budget) in scenario.power_budgets().into_iter().enumerate() {
        let used = plan.total(k);
        if used > fraction * budget {
            let s = fraction * budget / used;
            for n in 0..plan.num_slots() {
                out.set(k, n, plan.get(k, n) * s);
            }
        }
    }
    out
}

/// Optimal powers for the scheduled triples, starting from `current`.
pub fn solve_power(
    scenario: &Scenario,
    assignment: &Assignment,
    eta: &Normalizers,
    gains: &ChannelGains,
    current: &PowerPlan,
    opts: &SolveOptions,
) -> Result<PowerOutcome, PowerError> {
    let built = build_power_program(scenario, assignment, eta, gains);
    let (k_count, n_slots) = (scenario.num_devices(), scenario.num_slots());
    if built.active_constraints == 0 {
        return Ok(PowerOutcome {
            plan: PowerPlan::zeros(k_count, n_slots),
            gamma: 0.0,
            solver_gamma: 0.0,
            status: SolveStatus::Optimal,
            newton_iterations: 0,
        });
    }
    let start_plan = shrink_to_budget(scenario, current, 0.99);
    let start_ratio = max_ratio(scenario, assignment, eta, &start_plan, gains);
    let gamma0 = if start_ratio > 0.0 { 2.0 * start_ratio } else { 1.0 };
    let start = built.point(&start_plan, gamma0);
    let report = convex::solve(&built.program, &start, opts)?;
    match report.status {
        SolveStatus::Infeasible => return Err(PowerError::Infeasible(report.infeasibility.unwrap_or(f64::NAN))),
        SolveStatus::IterationLimit if report.max_violation > opts.feas_tol => return Err(PowerError::IterationLimit),
        _ => {}
    }
    let plan = built.plan(&report.x, k_count, n_slots);
    let gamma = max_ratio(scenario, assignment, eta, &plan, gains);
    Ok(PowerOutcome {
        plan,
        gamma,
        solver_gamma: report.x[built.gamma_index()],
        status: report.status,
        newton_iterations: report.newton_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::gains;
    use crate::scenario::{Cluster, DeviceSpec, PhysParams};
    use crate::trajectory::TrajectorySet;

    fn one_device(budget: f64) -> Scenario {
        Scenario {
            phys: PhysParams {
                sigma2: 0.0,
                ..PhysParams::paper(0.5)
            },
            clusters: vec![Cluster {
                id: 1,
                devices: vec![DeviceSpec {
                    position: [0.0, 0.0],
                    power_budget: budget,
                }],
                epsilon: 0.5,
            }],
            num_uavs: 1,
            rng_seed: 0,
        }
    }

    fn unit_theta(budget: f64) -> (PowerOutcome, f64) {
        let s = one_device(budget);
        let g = gains(&s, &TrajectorySet::hover(&[[0.0, 0.0]], 1)).unwrap();
        let mut a = Assignment::for_scenario(&s);
        a.set(0, 0, 0, true);
        let mut eta = Normalizers::zeros(1, 1, 1);
        eta.set(0, 0, 0, 1.0 / g.magnitude(0, 0, 0));
        let mut p = PowerPlan::zeros(1, 1);
        p.set(0, 0, budget / 10.0);
        let out = solve_power(&s, &a, &eta, &g, &p, &SolveOptions::default()).unwrap();
        (out, s.clusters[0].epsilon)
    }

    #[test]
    fn perfect_alignment_affordable() {
        let (out, _) = unit_theta(4.0);
        assert!((out.plan.get(0, 0) - 1.0).abs() < 1e-4, "{}", out.plan.get(0, 0));
        assert!(out.gamma < 1e-8);
    }

    #[test]
    fn budget_limited() {
        let (out, eps) = unit_theta(0.25);
        assert!((out.plan.get(0, 0).sqrt() - 0.5).abs() < 1e-7);
        assert!((out.gamma * eps - 0.25).abs() < 1e-7);
        assert!((out.gamma - out.solver_gamma).abs() < 1e-7);
    }

    #[test]
    fn unscheduled_devices_get_no_power() {
        let mut s = one_device(1.0);
        s.phys.sigma2 = 1e-11;
        s.phys.duration = 1.0;
        s.clusters.push(Cluster {
            id: 2,
            devices: vec![DeviceSpec {
                position: [50.0, 0.0],
                power_budget: 1.0,
            }],
            epsilon: 0.5,
        });
        let g = gains(&s, &TrajectorySet::hover(&[[0.0, 0.0]], 2)).unwrap();
        let mut a = Assignment::for_scenario(&s);
        a.set(0, 0, 0, true);
        a.set(1, 0, 1, true);
        let p0 = equal_power(&s, &a, 1);
        let eta = crate::normalizing::optimal_eta(&s, &a, &p0, &g);
        let out = solve_power(&s, &a, &eta, &g, &p0, &SolveOptions::default()).unwrap();
        assert_eq!(out.plan.get(0, 1), 0.0);
        assert_eq!(out.plan.get(1, 0), 0.0);
        for k in 0..2 {
            assert!(out.plan.total(k) <= 1.0);
        }
    }

    #[test]
    fn equal_power_spends_budget() {
        let mut s = one_device(0.8);
        s.phys.duration = 2.0;
        let mut a = Assignment::for_scenario(&s);
        a.set(0, 0, 1, true);
        a.set(0, 0, 3, true);
        let p = equal_power(&s, &a, 2);
        assert!((p.total(0) - 0.8).abs() < 1e-15);
        assert_eq!(p.get(0, 0), 0.0);
    }
}
