//! UAV trajectory optimization by successive convex approximation.
//!
//! For fixed schedule, powers and normalizers, the per-slot MSE depends on the
//! UAV position through two non-convex pieces: the received-power terms
//! `(H² + ‖q − w‖²)^(−γ/2)` and the alignment terms `−|h|`. The first is kept
//! exactly but evaluated at the linear lower bound of `‖q − w‖²` around the
//! expansion point; the second is replaced by its first-order lower bound in
//! `‖q − w‖²`. Both substitutions over-estimate the MSE, so every surrogate
//! feasible point is feasible for the true problem.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, ChannelError};
use crate::convex::{self, ConvexConstraint, ConvexError, ConvexProgram, QuadraticConstraint, SolveOptions, SolveStatus};
use crate::normalizing::Normalizers;
use crate::power::PowerPlan;
use crate::scenario::{distance, squared_distance, PhysParams, Point, Scenario};
use crate::scheduling::Assignment;

/// Horizontal UAV positions. Slot `n` (0-based) is flown at waypoint `n + 1`;
/// waypoint 0 coincides with waypoint `N`, so each path is closed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySet {
    positions: Vec<Vec<Point>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("trajectory set is empty or its UAVs have different slot counts")]
    Ragged,
    #[error("UAV {uav} moves {step:.3} m between waypoints {from} and {to}, limit {limit:.3} m")]
    Speed {
        uav: usize,
        from: usize,
        to: usize,
        step: f64,
        limit: f64,
    },
    #[error("UAVs {a} and {b} are {gap:.3} m apart in slot {slot} after repair, minimum {dmin} m")]
    Collision {
        a: usize,
        b: usize,
        slot: usize,
        gap: f64,
        dmin: f64,
    },
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Convex(#[from] ConvexError),
}

impl TrajectorySet {
    pub fn new(positions: Vec<Vec<Point>>) -> Result<Self, TrajectoryError> {
        let n = positions.first().map(Vec::len).unwrap_or(0);
        if n == 0 || positions.iter().any(|p| p.len() != n) {
            return Err(TrajectoryError::Ragged);
        }
        Ok(TrajectorySet { positions })
    }

    /// Every UAV stays at its point for all `num_slots` slots.
    pub fn hover(points: &[Point], num_slots: usize) -> Self {
        TrajectorySet {
            positions: points.iter().map(|&p| vec![p; num_slots]).collect(),
        }
    }

    /// Closed circles: UAV `m` flies `centers[m]` with `radii[m]`, waypoint `j`
    /// at angle `phases[m] + 2πj/N`.
    pub fn circles(centers: &[Point], radii: &[f64], phases: &[f64], num_slots: usize) -> Self {
        let step = 2.0 * std::f64::consts::PI / num_slots as f64;
        let positions = centers
            .iter()
            .zip(radii)
            .zip(phases)
            .map(|((c, &r), &phase)| {
                (1..=num_slots)
                    .map(|j| {
                        let a = phase + step * j as f64;
                        [c[0] + r * a.cos(), c[1] + r * a.sin()]
                    })
                    .collect()
            })
            .collect();
        TrajectorySet { positions }
    }

    pub fn num_uavs(&self) -> usize {
        self.positions.len()
    }

    pub fn num_slots(&self) -> usize {
        self.positions[0].len()
    }

    /// Position during slot `n`.
    #[inline]
    pub fn position(&self, m: usize, n: usize) -> Point {
        self.positions[m][n]
    }

    pub fn set_position(&mut self, m: usize, n: usize, p: Point) {
        self.positions[m][n] = p;
    }

    /// Waypoint `j ∈ 0..=N`; waypoint 0 equals waypoint `N`.
    pub fn waypoint(&self, m: usize, j: usize) -> Point {
        let n = self.num_slots();
        if j == 0 {
            self.positions[m][n - 1]
        } else {
            self.positions[m][j - 1]
        }
    }

    pub fn positions(&self) -> &[Vec<Point>] {
        &self.positions
    }

    /// Longest single-slot move over all UAVs, closing leg included.
    pub fn max_step(&self) -> f64 {
        let n = self.num_slots();
        (0..self.num_uavs())
            .flat_map(|m| (1..=n).map(move |j| (m, j)))
            .map(|(m, j)| distance(self.waypoint(m, j), self.waypoint(m, j - 1)))
            .fold(0.0, f64::max)
    }

    /// Smallest inter-UAV distance over all slots; infinite for one UAV.
    pub fn min_separation(&self) -> f64 {
        let mut best = f64::INFINITY;
        for n in 0..self.num_slots() {
            for m in 0..self.num_uavs() {
                for i in m + 1..self.num_uavs() {
                    best = best.min(distance(self.positions[m][n], self.positions[i][n]));
                }
            }
        }
        best
    }

    /// First violated speed limit, if any.
    pub fn speed_violation(&self, phys: &PhysParams, tol: f64) -> Option<TrajectoryError> {
        let limit = phys.max_step();
        let n = self.num_slots();
        for m in 0..self.num_uavs() {
            for j in 1..=n {
                let step = distance(self.waypoint(m, j), self.waypoint(m, j - 1));
                if step > limit + tol {
                    return Some(TrajectoryError::Speed {
                        uav: m,
                        from: j - 1,
                        to: j,
                        step,
                        limit,
                    });
                }
            }
        }
        None
    }

    pub fn collision_violation(&self, dmin: f64, tol: f64) -> Option<TrajectoryError> {
        for n in 0..self.num_slots() {
            for m in 0..self.num_uavs() {
                for i in m + 1..self.num_uavs() {
                    let gap = distance(self.positions[m][n], self.positions[i][n]);
                    if gap < dmin - tol {
                        return Some(TrajectoryError::Collision {
                            a: m,
                            b: i,
                            slot: n,
                            gap,
                            dmin,
                        });
                    }
                }
            }
        }
        None
    }
}

/// `F(t) = 2η√(β0 p)(H² + t)^(−γ/4)`, i.e. `2η√p|h|` with `t = ‖q − w‖²`.
pub fn alignment_term(phys: &PhysParams, eta: f64, p: f64, t: f64) -> f64 {
    2.0 * eta * (phys.beta0 * p).sqrt() * (phys.altitude.powi(2) + t).powf(-phys.gamma / 4.0)
}

/// `dF/dt`.
pub fn alignment_slope(phys: &PhysParams, eta: f64, p: f64, t: f64) -> f64 {
    -(phys.gamma / 2.0) * eta * (phys.beta0 * p).sqrt() * (phys.altitude.powi(2) + t).powf(-(phys.gamma + 4.0) / 4.0)
}

/// First-order lower bound of `F` at `t` expanded around `t_ref`.
pub fn alignment_lower_bound(phys: &PhysParams, eta: f64, p: f64, t_ref: f64, t: f64) -> f64 {
    alignment_term(phys, eta, p, t_ref) + alignment_slope(phys, eta, p, t_ref) * (t - t_ref)
}

/// Linear lower bound of `‖q − w‖²` around `q_ref`.
pub fn distance_lower_bound(q_ref: Point, w: Point, q: Point) -> f64 {
    let d = [q_ref[0] - w[0], q_ref[1] - w[1]];
    squared_distance(q_ref, w) + 2.0 * (d[0] * (q[0] - q_ref[0]) + d[1] * (q[1] - q_ref[1]))
}

/// Linear lower bound of `‖q_m − q_i‖²` around `(qm_ref, qi_ref)`.
pub fn separation_lower_bound(qm_ref: Point, qi_ref: Point, qm: Point, qi: Point) -> f64 {
    let d = [qm_ref[0] - qi_ref[0], qm_ref[1] - qi_ref[1]];
    -(d[0] * d[0] + d[1] * d[1]) + 2.0 * (d[0] * (qm[0] - qi[0]) + d[1] * (qm[1] - qi[1]))
}

/// Reference trajectory with the per-(device, UAV, slot) quantities the
/// surrogate needs.
#[derive(Debug, Clone)]
pub struct ScaExpansionPoint {
    pub reference: TrajectorySet,
    num_uavs: usize,
    num_slots: usize,
    /// `‖q^r_m[n] − w_k‖²`, indexed `(k * M + m) * N + n`.
    sq_dist: Vec<f64>,
}

impl ScaExpansionPoint {
    pub fn new(scenario: &Scenario, reference: TrajectorySet) -> Self {
        let (mm, nn) = (reference.num_uavs(), reference.num_slots());
        let mut sq_dist = Vec::with_capacity(scenario.num_devices() * mm * nn);
        for w in scenario.device_positions() {
            for m in 0..mm {
                for n in 0..nn {
                    sq_dist.push(squared_distance(reference.position(m, n), w));
                }
            }
        }
        ScaExpansionPoint {
            reference,
            num_uavs: mm,
            num_slots: nn,
            sq_dist,
        }
    }

    #[inline]
    pub fn sq_dist(&self, k: usize, m: usize, n: usize) -> f64 {
        self.sq_dist[(k * self.num_uavs + m) * self.num_slots + n]
    }
}

/// Argument `H² + s` of a received-power term, with `s` either the linear
/// distance bound in `q` or an explicit slack variable.
#[derive(Debug, Clone)]
enum PowerArg {
    Bound { g: [f64; 2], q_ref: Point, base: f64 },
    Slack { index: usize, h2: f64 },
}

#[derive(Debug, Clone)]
struct PowerTerm {
    coef: f64,
    arg: PowerArg,
}

/// Surrogate MSE-ratio constraint of one scheduled `(l, m, n)`.
#[derive(Debug, Clone)]
struct SurrogateMse {
    q: usize,
    gamma: usize,
    scale: f64,
    half_gamma: f64,
    constant: f64,
    power_terms: Vec<PowerTerm>,
    /// `(a_k, w_k)` with `a_k = −F'_k > 0`: contributes `a_k‖q − w_k‖²`.
    alignment: Vec<(f64, Point)>,
}

impl SurrogateMse {
    fn arg(&self, term: &PowerTerm, x: &[f64]) -> f64 {
        match term.arg {
            PowerArg::Bound { g, q_ref, base } => {
                base + g[0] * (x[self.q] - q_ref[0]) + g[1] * (x[self.q + 1] - q_ref[1])
            }
            PowerArg::Slack { index, h2 } => h2 + x[index],
        }
    }
}

impl ConvexConstraint for SurrogateMse {
    fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for t in &self.power_terms {
            let u = self.arg(t, x);
            if u <= 0.0 {
                return f64::INFINITY;
            }
            v += t.coef * u.powf(-self.half_gamma);
        }
        let q = [x[self.q], x[self.q + 1]];
        for &(a, w) in &self.alignment {
            v += a * squared_distance(q, w);
        }
        self.scale * v - x[self.gamma]
    }

    fn gradient(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        let q = [x[self.q], x[self.q + 1]];
        let mut gq = [0.0; 2];
        for t in &self.power_terms {
            let u = self.arg(t, x);
            let d = -self.half_gamma * t.coef * u.powf(-self.half_gamma - 1.0) * self.scale;
            match t.arg {
                PowerArg::Bound { g, .. } => {
                    gq[0] += d * g[0];
                    gq[1] += d * g[1];
                }
                PowerArg::Slack { index, .. } => out.push((index, d)),
            }
        }
        for &(a, w) in &self.alignment {
            gq[0] += 2.0 * a * (q[0] - w[0]) * self.scale;
            gq[1] += 2.0 * a * (q[1] - w[1]) * self.scale;
        }
        out.push((self.q, gq[0]));
        out.push((self.q + 1, gq[1]));
        out.push((self.gamma, -1.0));
    }

    fn add_hessian(&self, x: &[f64], scale: f64, hess: &mut DMatrix<f64>) {
        let s = scale * self.scale;
        let curvature = self.half_gamma * (self.half_gamma + 1.0);
        for t in &self.power_terms {
            let u = self.arg(t, x);
            let c = s * t.coef * curvature * u.powf(-self.half_gamma - 2.0);
            match t.arg {
                PowerArg::Bound { g, .. } => {
                    for i in 0..2 {
                        for j in 0..2 {
                            hess[(self.q + i, self.q + j)] += c * g[i] * g[j];
                        }
                    }
                }
                PowerArg::Slack { index, .. } => hess[(index, index)] += c,
            }
        }
        let a: f64 = self.alignment.iter().map(|&(a, _)| a).sum();
        hess[(self.q, self.q)] += 2.0 * s * a;
        hess[(self.q + 1, self.q + 1)] += 2.0 * s * a;
    }
}

/// How the distance slack of the received-power terms is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SlackMode {
    /// Slack replaced by its binding value, the linear distance bound.
    #[default]
    Substituted,
    /// One slack variable per (device, UAV, slot) term with `s ≤ D^lb(q)`.
    Explicit,
}

pub struct ScaProgram {
    pub program: ConvexProgram,
    pub num_uavs: usize,
    pub num_slots: usize,
    /// Slack start values (explicit mode only), in variable order after `Γ`.
    slack_start: Vec<f64>,
    pub active_constraints: usize,
}

impl ScaProgram {
    pub fn gamma_index(&self) -> usize {
        2 * self.num_uavs * self.num_slots
    }

    pub fn point(&self, q: &TrajectorySet, gamma: f64) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.program.dim);
        for m in 0..self.num_uavs {
            for n in 0..self.num_slots {
                let p = q.position(m, n);
                x.push(p[0]);
                x.push(p[1]);
            }
        }
        x.push(gamma);
        x.extend_from_slice(&self.slack_start);
        x
    }

    pub fn trajectories(&self, x: &[f64]) -> TrajectorySet {
        let positions = (0..self.num_uavs)
            .map(|m| {
                (0..self.num_slots)
                    .map(|n| {
                        let i = 2 * (m * self.num_slots + n);
                        [x[i], x[i + 1]]
                    })
                    .collect()
            })
            .collect();
        TrajectorySet { positions }
    }
}

/// Convex surrogate of the trajectory block at `expansion`.
pub fn build_sca_program(
    scenario: &Scenario,
    assignment: &Assignment,
    power: &PowerPlan,
    eta: &Normalizers,
    expansion: &ScaExpansionPoint,
    mode: SlackMode,
) -> ScaProgram {
    let phys = &scenario.phys;
    let h2 = phys.altitude * phys.altitude;
    let (mm, nn) = (scenario.num_uavs, scenario.num_slots());
    let gamma_idx = 2 * mm * nn;
    let ranges = scenario.cluster_ranges();
    let cluster_of = scenario.device_clusters();
    let positions = scenario.device_positions();
    let q_var = |m: usize, n: usize| 2 * (m * nn + n);

    let mut slack_start = Vec::new();
    let mut slack_rows: Vec<QuadraticConstraint> = Vec::new();
    let mut surrogates = Vec::new();
    for (l, m, n) in assignment.triples() {
        let e = eta.get(l, m, n);
        let k_l = ranges[l].len() as f64;
        let q_ref = expansion.reference.position(m, n);
        let mut c = SurrogateMse {
            q: q_var(m, n),
            gamma: gamma_idx,
            scale: 1.0 / (scenario.clusters[l].epsilon * k_l * k_l),
            half_gamma: phys.gamma / 2.0,
            constant: k_l + e * e * phys.sigma2,
            power_terms: Vec::new(),
            alignment: Vec::new(),
        };
        for (k, &w) in positions.iter().enumerate() {
            let p = power.get(k, n);
            if p <= 0.0 {
                continue;
            }
            let s_ref = expansion.sq_dist(k, m, n);
            let g = [2.0 * (q_ref[0] - w[0]), 2.0 * (q_ref[1] - w[1])];
            let arg = match mode {
                SlackMode::Substituted => PowerArg::Bound {
                    g,
                    q_ref,
                    base: h2 + s_ref,
                },
                SlackMode::Explicit => {
                    let index = gamma_idx + 1 + slack_start.len();
                    // Strictly inside s ≤ D^lb(q^r) = s_ref.
                    slack_start.push(s_ref - 1e-3 * h2);
                    let inv = 1.0 / h2;
                    slack_rows.push(QuadraticConstraint::linear(
                        vec![index, c.q, c.q + 1],
                        vec![inv, -g[0] * inv, -g[1] * inv],
                        (-s_ref + g[0] * q_ref[0] + g[1] * q_ref[1]) * inv,
                    ));
                    PowerArg::Slack { index, h2 }
                }
            };
            c.power_terms.push(PowerTerm {
                coef: e * e * p * phys.beta0,
                arg,
            });
            if cluster_of[k] == l {
                let f_ref = alignment_term(phys, e, p, s_ref);
                let slope = alignment_slope(phys, e, p, s_ref);
                c.constant -= f_ref - slope * s_ref;
                c.alignment.push((-slope, w));
            }
        }
        // Devices of cluster l that do not transmit still count through K_l.
        surrogates.push(c);
    }

    let dim = gamma_idx + 1 + slack_start.len();
    let mut objective = vec![0.0; dim];
    objective[gamma_idx] = 1.0;
    let mut program = ConvexProgram::new(dim, objective);
    let active_constraints = surrogates.len();
    for c in surrogates {
        program.push(c);
    }
    for r in slack_rows {
        program.push(r);
    }

    let vmax_step = phys.max_step();
    let inv_v2 = 1.0 / (vmax_step * vmax_step);
    if nn > 1 {
        for m in 0..mm {
            for n in 0..nn {
                if nn == 2 && n == 0 {
                    continue;
                }
                let prev = (n + nn - 1) % nn;
                let (a, b) = (q_var(m, n), q_var(m, prev));
                let v = 2.0 * inv_v2;
                #[rustfmt::skip]
                let quad = vec![
                    v, 0.0, -v, 0.0,
                    0.0, v, 0.0, -v,
                    -v, 0.0, v, 0.0,
                    0.0, -v, 0.0, v,
                ];
                program.push(QuadraticConstraint {
                    vars: vec![a, a + 1, b, b + 1],
                    quad,
                    linear: vec![0.0; 4],
                    constant: -1.0,
                });
            }
        }
    }

    if phys.dmin > 0.0 {
        let inv = 1.0 / (phys.dmin * phys.dmin);
        for n in 0..nn {
            for m in 0..mm {
                for i in m + 1..mm {
                    let (qm, qi) = (expansion.reference.position(m, n), expansion.reference.position(i, n));
                    let d = [qm[0] - qi[0], qm[1] - qi[1]];
                    let (a, b) = (q_var(m, n), q_var(i, n));
                    // (dmin² − d^lb) / dmin² ≤ 0
                    program.push(QuadraticConstraint::linear(
                        vec![a, a + 1, b, b + 1],
                        vec![-2.0 * d[0] * inv, -2.0 * d[1] * inv, 2.0 * d[0] * inv, 2.0 * d[1] * inv],
                        (phys.dmin * phys.dmin + d[0] * d[0] + d[1] * d[1]) * inv,
                    ));
                }
            }
        }
    }

    ScaProgram {
        program,
        num_uavs: mm,
        num_slots: nn,
        slack_start,
        active_constraints,
    }
}

/// Pushes UAV pairs closer than `dmin` apart along their connecting line.
pub fn repair_collisions(q: &TrajectorySet, dmin: f64) -> TrajectorySet {
    let mut out = q.clone();
    if dmin <= 0.0 {
        return out;
    }
    let target = dmin * (1.0 + 1e-6);
    for _ in 0..50 {
        let mut moved = false;
        for n in 0..out.num_slots() {
            for m in 0..out.num_uavs() {
                for i in m + 1..out.num_uavs() {
                    let (a, b) = (out.position(m, n), out.position(i, n));
                    let gap = distance(a, b);
                    if gap >= target {
                        continue;
                    }
                    let dir = if gap > 0.0 {
                        [(a[0] - b[0]) / gap, (a[1] - b[1]) / gap]
                    } else {
                        [1.0, 0.0]
                    };
                    let push = 0.5 * (target - gap);
                    out.set_position(m, n, [a[0] + push * dir[0], a[1] + push * dir[1]]);
                    out.set_position(i, n, [b[0] - push * dir[0], b[1] - push * dir[1]]);
                    moved = true;
                }
            }
        }
        if !moved {
            break;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaOptions {
    pub max_iters: usize,
    /// Stop once the relative decrease of the true `Γ` falls below this.
    pub rel_tol: f64,
}

impl Default for ScaOptions {
    fn default() -> Self {
        ScaOptions {
            max_iters: 30,
            rel_tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScaOutcome {
    pub trajectories: TrajectorySet,
    pub gamma: f64,
    /// True `Γ` at the start and after every accepted iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    /// Set when a convex solve failed and the last feasible iterate was kept.
    pub solver_failure: Option<String>,
}

pub fn true_gamma(
    scenario: &Scenario,
    assignment: &Assignment,
    power: &PowerPlan,
    eta: &Normalizers,
    q: &TrajectorySet,
) -> Result<f64, ChannelError> {
    let g = channel::gains(scenario, q)?;
    Ok(channel::max_ratio(scenario, assignment, eta, power, &g))
}

/// Runs SCA from `q_init` until the true `Γ` stalls.
pub fn sca_iterate(
    scenario: &Scenario,
    assignment: &Assignment,
    power: &PowerPlan,
    eta: &Normalizers,
    q_init: &TrajectorySet,
    sca: &ScaOptions,
    solver: &SolveOptions,
) -> Result<ScaOutcome, TrajectoryError> {
    let phys = &scenario.phys;
    let mut q = repair_collisions(q_init, phys.dmin);
    if let Some(e) = q.speed_violation(phys, 1e-9) {
        return Err(e);
    }
    if let Some(e) = q.collision_violation(phys.dmin, 1e-6) {
        return Err(e);
    }
    let mut gamma = true_gamma(scenario, assignment, power, eta, &q)?;
    let mut trace = vec![gamma];
    let mut iterations = 0;
    let mut solver_failure = None;
    if assignment.triples().next().is_none() {
        return Ok(ScaOutcome {
            trajectories: q,
            gamma,
            trace,
            iterations,
            solver_failure,
        });
    }
    for _ in 0..sca.max_iters {
        let expansion = ScaExpansionPoint::new(scenario, q.clone());
        let built = build_sca_program(scenario, assignment, power, eta, &expansion, SlackMode::Substituted);
        let gamma0 = if gamma > 0.0 { 2.0 * gamma } else { 1.0 };
        let start = built.point(&q, gamma0);
        let report = match convex::solve(&built.program, &start, solver) {
            Ok(r) => r,
            Err(e) => {
                solver_failure = Some(e.to_string());
                break;
            }
        };
        if report.status == SolveStatus::Infeasible
            || (report.status == SolveStatus::IterationLimit && report.max_violation > solver.feas_tol)
        {
            solver_failure = Some(format!("trajectory surrogate solve ended {:?}", report.status));
            break;
        }
        let candidate = built.trajectories(&report.x);
        if candidate.speed_violation(phys, 1e-6).is_some() || candidate.collision_violation(phys.dmin, 1e-6).is_some() {
            solver_failure = Some("surrogate solution violates motion constraints".into());
            break;
        }
        let next = true_gamma(scenario, assignment, power, eta, &candidate)?;
        iterations += 1;
        if next > gamma {
            // Numerical noise only; the surrogate bounds the true value.
            break;
        }
        let decrease = if gamma > 0.0 { (gamma - next) / gamma } else { 0.0 };
        q = candidate;
        gamma = next;
        trace.push(gamma);
        if decrease < sca.rel_tol {
            break;
        }
    }
    Ok(ScaOutcome {
        trajectories: q,
        gamma,
        trace,
        iterations,
        solver_failure,
    })
}
