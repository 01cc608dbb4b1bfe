//! Block-coordinate descent over (schedule, power, normalizers, trajectories)
//! and the outer bisection on the per-cluster task count.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{self, ChannelError, ChannelGains};
use crate::convex::SolveOptions;
use crate::normalizing::{eta_for_triple, optimal_eta, Normalizers};
use crate::power::{equal_power, solve_power, PowerPlan};
use crate::scenario::{centroid, distance, Point, Scenario, Violation};
use crate::scheduling::{
    hypothetical_ratios, min_bottleneck_assignment, solve_scheduling, Assignment, CostTensor, SchedulingError,
    SchedulingOptions, SlotRule,
};
use crate::trajectory::{repair_collisions, sca_iterate, ScaOptions, TrajectoryError, TrajectorySet};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid scenario: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidScenario(Vec<Violation>),
    #[error("task count {d} outside 1..={max}")]
    TaskCount { d: usize, max: usize },
    #[error(transparent)]
    Scheduling(#[from] SchedulingError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
    #[error("pinned trajectories: {0}")]
    Pinned(String),
}

/// How the first schedule of a probe is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSchedule {
    /// Better (lower `Γ` at `P_k/D`) of two schedules along the initial
    /// trajectories: the bottleneck-optimal one for isolated-cluster ratios,
    /// and a greedy placement that charges inter-cluster interference.
    #[default]
    Geometric,
    /// Clusters take (slot, UAV) pairs in turn.
    RoundRobin,
}

/// Which blocks a run optimizes; benchmark schemes switch blocks off.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub optimize_power: bool,
    pub optimize_trajectory: bool,
    pub slot_rule: SlotRule,
    /// Fixed trajectories used instead of the circular initialization.
    pub pinned: Option<TrajectorySet>,
}

impl Default for Pipeline {
    fn default() -> Self {
        Pipeline {
            optimize_power: true,
            optimize_trajectory: true,
            slot_rule: SlotRule::PerUav,
            pinned: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcdOptions {
    pub max_iters: usize,
    /// Stop once the fractional decrease of `Γ` falls below this.
    pub tol: f64,
    pub init_schedule: InitSchedule,
    /// Seed each bisection probe's trajectories with the last accepted ones.
    pub warm_start: bool,
    pub scheduling: SchedulingOptions,
    pub sca: ScaOptions,
    #[serde(skip)]
    pub solver: SolveOptions,
}

impl Default for BcdOptions {
    fn default() -> Self {
        BcdOptions {
            max_iters: 50,
            tol: 1e-3,
            init_schedule: InitSchedule::Geometric,
            warm_start: false,
            scheduling: SchedulingOptions::default(),
            sca: ScaOptions::default(),
            solver: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallCounts {
    pub scheduling: usize,
    pub power: usize,
    pub normalizing: usize,
    pub trajectory: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcdState {
    pub assignment: Assignment,
    pub power: PowerPlan,
    pub eta: Normalizers,
    pub trajectories: TrajectorySet,
    pub gamma_history: Vec<f64>,
}

impl BcdState {
    pub fn gamma(&self) -> f64 {
        self.gamma_history.last().copied().unwrap_or(f64::INFINITY)
    }
}

/// Largest task count any cluster could receive: `⌊MN/L⌋`.
pub fn max_task_count(scenario: &Scenario) -> usize {
    scenario.max_task_count()
}

/// UAV serving cluster `l` in the initial trajectory layout.
pub fn home_uav(l: usize, num_uavs: usize) -> usize {
    l % num_uavs
}

/// Closed circles, one per UAV, around the centroid of its home clusters.
pub fn circular_trajectories(scenario: &Scenario) -> TrajectorySet {
    let (mm, nn) = (scenario.num_uavs, scenario.num_slots());
    let phys = &scenario.phys;
    let cap = phys.vmax * phys.duration / (2.0 * std::f64::consts::PI);
    let mut centers = Vec::with_capacity(mm);
    let mut radii = Vec::with_capacity(mm);
    let mut phases = Vec::with_capacity(mm);
    for m in 0..mm {
        let own: Vec<Point> = (0..scenario.num_clusters())
            .filter(|&l| home_uav(l, mm) == m)
            .map(|l| scenario.cluster_centroid(l))
            .collect();
        let c = centroid(own.iter().copied());
        let reach = own.iter().map(|&p| distance(p, c)).fold(0.0, f64::max);
        centers.push(c);
        radii.push(reach.min(cap));
        phases.push(2.0 * std::f64::consts::PI * m as f64 / mm as f64);
    }
    TrajectorySet::circles(&centers, &radii, &phases, nn)
}

/// Ratios each cluster would see alone with `P_k/d` in every slot.
fn isolated_ratios(scenario: &Scenario, gains: &ChannelGains, d: usize) -> CostTensor {
    let (ll, mm, nn) = (scenario.num_clusters(), scenario.num_uavs, scenario.num_slots());
    let mut plan = PowerPlan::zeros(scenario.num_devices(), nn);
    for (k, budget) in scenario.power_budgets().into_iter().enumerate() {
        for n in 0..nn {
            plan.set(k, n, budget / d as f64);
        }
    }
    let ranges = scenario.cluster_ranges();
    // Every device belongs to its own "cluster" 0 here so nothing interferes.
    let alone = vec![0usize; scenario.num_devices()];
    let mut ratios = Vec::with_capacity(ll * mm * nn);
    for (l, range) in ranges.iter().enumerate() {
        let k_l = range.len() as f64;
        for m in 0..mm {
            for n in 0..nn {
                let e = eta_for_triple(scenario, &alone, range.clone(), 0, m, n, &plan, gains);
                let mut total = e * e * scenario.phys.sigma2;
                for k in range.clone() {
                    let a = e * gains.magnitude(k, m, n) * plan.get(k, n).sqrt() - 1.0;
                    total += a * a;
                }
                ratios.push(total / (k_l * k_l) / scenario.clusters[l].epsilon);
            }
        }
    }
    CostTensor {
        num_clusters: ll,
        num_uavs: mm,
        num_slots: nn,
        ratios,
    }
}

/// `MSE/ε` of cluster `l` served by UAV `m` in slot `n` at power `P_k/D`,
/// with the optimal normalizer and the clusters in `others` transmitting at
/// the same level.
fn placed_ratio(
    scenario: &Scenario,
    ranges: &[std::ops::Range<usize>],
    budgets: &[f64],
    gains: &ChannelGains,
    d: usize,
    (l, m, n): (usize, usize, usize),
    others: &[usize],
) -> f64 {
    let share = |k: usize| budgets[k] / d as f64;
    let mut leak = 0.0;
    for &o in others {
        for k in ranges[o].clone() {
            leak += share(k) * gains.power_gain(k, m, n);
        }
    }
    let noise = leak + scenario.phys.sigma2;
    let (mut num, mut den) = (0.0, noise);
    for k in ranges[l].clone() {
        num += share(k).sqrt() * gains.magnitude(k, m, n);
        den += share(k) * gains.power_gain(k, m, n);
    }
    let eta = num / den;
    let mut total = eta * eta * noise;
    for k in ranges[l].clone() {
        let a = eta * gains.magnitude(k, m, n) * share(k).sqrt() - 1.0;
        total += a * a;
    }
    let k_l = ranges[l].len() as f64;
    total / (k_l * k_l) / scenario.clusters[l].epsilon
}

/// Places clusters one task at a time, each on the (slot, UAV) pair that
/// keeps the worst ratio in that slot lowest. `None` if a cluster runs out
/// of usable pairs.
fn greedy_placement(scenario: &Scenario, gains: &ChannelGains, d: usize, rule: SlotRule) -> Option<Assignment> {
    let (ll, mm, nn) = (scenario.num_clusters(), scenario.num_uavs, scenario.num_slots());
    let ranges = scenario.cluster_ranges();
    let budgets = scenario.power_budgets();
    let mut a = Assignment::new(ll, mm, nn);
    // (cluster, uav) pairs active per slot.
    let mut slot: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nn];
    for _ in 0..d {
        for l in 0..ll {
            let mut best: Option<(f64, usize, usize)> = None;
            for n in 0..nn {
                let busy = &slot[n];
                if busy.iter().any(|&(o, _)| o == l) || (rule == SlotRule::Orthogonal && !busy.is_empty()) {
                    continue;
                }
                let others: Vec<usize> = busy.iter().map(|&(o, _)| o).collect();
                for m in 0..mm {
                    if busy.iter().any(|&(_, u)| u == m) {
                        continue;
                    }
                    let mut cost = placed_ratio(scenario, &ranges, &budgets, gains, d, (l, m, n), &others);
                    for &(o, u) in busy {
                        let mut seen: Vec<usize> = others.iter().copied().filter(|&x| x != o).collect();
                        seen.push(l);
                        cost = cost.max(placed_ratio(scenario, &ranges, &budgets, gains, d, (o, u, n), &seen));
                    }
                    if best.is_none_or(|(c, _, _)| cost < c) {
                        best = Some((cost, m, n));
                    }
                }
            }
            let (_, m, n) = best?;
            a.set(l, m, n, true);
            slot[n].push((l, m));
        }
    }
    Some(a)
}

fn round_robin(scenario: &Scenario, d: usize, rule: SlotRule) -> Assignment {
    let (ll, mm, nn) = (scenario.num_clusters(), scenario.num_uavs, scenario.num_slots());
    let mut a = Assignment::new(ll, mm, nn);
    let mut count = vec![0usize; ll];
    let mut turn = 0;
    let per_slot = if rule == SlotRule::Orthogonal { 1 } else { mm };
    for n in 0..nn {
        for m in 0..per_slot {
            let l = turn % ll;
            turn += 1;
            if count[l] < d {
                a.set(l, m, n, true);
                count[l] += 1;
            }
        }
    }
    a
}

fn check_task_count(scenario: &Scenario, d: usize) -> Result<(), SolveError> {
    let max = max_task_count(scenario);
    if d == 0 || d > max {
        return Err(SolveError::TaskCount { d, max });
    }
    Ok(())
}

/// Starting point of a BCD run: trajectories (pinned, carried or circular),
/// an initial schedule, `P_k/D` on scheduled slots and the matching optimal
/// normalizers.
pub fn init_state(
    scenario: &Scenario,
    d: usize,
    pipeline: &Pipeline,
    opts: &BcdOptions,
    carried: Option<&TrajectorySet>,
) -> Result<BcdState, SolveError> {
    check_task_count(scenario, d)?;
    let trajectories = match (&pipeline.pinned, carried) {
        (Some(p), _) => p.clone(),
        (None, Some(q)) => q.clone(),
        (None, None) => repair_collisions(&circular_trajectories(scenario), scenario.phys.dmin),
    };
    let gains = channel::gains(scenario, &trajectories)?;
    let assignment = match opts.init_schedule {
        InitSchedule::Geometric => {
            let costs = isolated_ratios(scenario, &gains, d);
            let bottleneck = min_bottleneck_assignment(&costs, d, pipeline.slot_rule)?.0;
            let score = |a: &Assignment| {
                let p = equal_power(scenario, a, d);
                let e = optimal_eta(scenario, a, &p, &gains);
                channel::max_ratio(scenario, a, &e, &p, &gains)
            };
            match greedy_placement(scenario, &gains, d, pipeline.slot_rule) {
                Some(g) if score(&g) < score(&bottleneck) => g,
                _ => bottleneck,
            }
        }
        InitSchedule::RoundRobin => round_robin(scenario, d, pipeline.slot_rule),
    };
    let power = equal_power(scenario, &assignment, d);
    let eta = optimal_eta(scenario, &assignment, &power, &gains);
    let gamma = channel::max_ratio(scenario, &assignment, &eta, &power, &gains);
    Ok(BcdState {
        assignment,
        power,
        eta,
        trajectories,
        gamma_history: vec![gamma],
    })
}

/// Zeroes the powers of devices whose cluster is idle in a slot.
fn restrict_power(scenario: &Scenario, assignment: &Assignment, power: &PowerPlan) -> PowerPlan {
    let mut out = power.clone();
    for (k, &l) in scenario.device_clusters().iter().enumerate() {
        for n in 0..scenario.num_slots() {
            if !assignment.cluster_active(l, n) {
                out.set(k, n, 0.0);
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct BcdRun {
    /// Best state seen; its history is the trace up to that state.
    pub state: BcdState,
    /// `Γ` after initialization and after every cycle.
    pub trace: Vec<f64>,
    pub gamma: f64,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

/// Cycles scheduling → power → normalizers → trajectories from `init`.
///
/// Stops when the fractional decrease of the true `Γ` drops below
/// `opts.tol`, after `opts.max_iters` cycles, or as soon as `Γ ≤ stop_at`.
pub fn bcd_solve(
    scenario: &Scenario,
    d: usize,
    pipeline: &Pipeline,
    opts: &BcdOptions,
    init: BcdState,
    stop_at: Option<f64>,
    counts: &mut CallCounts,
) -> Result<BcdRun, SolveError> {
    check_task_count(scenario, d)?;
    let mut state = init;
    let mut gamma = state.gamma();
    let mut best = state.clone();
    let mut warnings = Vec::new();
    let mut iterations = 0;
    if stop_at.is_some_and(|s| gamma <= s) {
        return Ok(BcdRun {
            gamma,
            trace: state.gamma_history.clone(),
            state,
            iterations,
            warnings,
        });
    }
    for _ in 0..opts.max_iters {
        iterations += 1;
        let gains = channel::gains(scenario, &state.trajectories)?;

        counts.scheduling += 1;
        let costs = hypothetical_ratios(scenario, &gains, &state.power, &state.eta);
        let schedule = solve_scheduling(&costs, d, pipeline.slot_rule, &opts.scheduling)?;
        if schedule.assignment != state.assignment {
            state.assignment = schedule.assignment;
            state.power = restrict_power(scenario, &state.assignment, &state.power);
            state.eta = restrict_eta(&state.assignment, &state.eta);
        }

        if pipeline.optimize_power {
            counts.power += 1;
            match solve_power(scenario, &state.assignment, &state.eta, &gains, &state.power, &opts.solver) {
                Ok(out) => {
                    let before = channel::max_ratio(scenario, &state.assignment, &state.eta, &state.power, &gains);
                    if out.gamma <= before {
                        state.power = out.plan;
                    }
                }
                Err(e) => warnings.push(format!("power block: {e}")),
            }
        } else {
            state.power = equal_power(scenario, &state.assignment, d);
        }

        counts.normalizing += 1;
        state.eta = optimal_eta(scenario, &state.assignment, &state.power, &gains);

        if pipeline.optimize_trajectory && pipeline.pinned.is_none() {
            counts.trajectory += 1;
            match sca_iterate(
                scenario,
                &state.assignment,
                &state.power,
                &state.eta,
                &state.trajectories,
                &opts.sca,
                &opts.solver,
            ) {
                Ok(out) => {
                    if let Some(f) = out.solver_failure {
                        warnings.push(format!("trajectory block: {f}"));
                    }
                    state.trajectories = out.trajectories;
                }
                Err(e) => warnings.push(format!("trajectory block: {e}")),
            }
        }

        let gains = channel::gains(scenario, &state.trajectories)?;
        let next = channel::max_ratio(scenario, &state.assignment, &state.eta, &state.power, &gains);
        state.gamma_history.push(next);
        let decrease = if gamma.is_finite() && gamma > 0.0 {
            (gamma - next) / gamma
        } else {
            0.0
        };
        if next <= best.gamma() {
            best = state.clone();
        }
        gamma = next;
        if stop_at.is_some_and(|s| next <= s) || decrease < opts.tol {
            break;
        }
    }
    let gamma = best.gamma();
    Ok(BcdRun {
        trace: state.gamma_history,
        state: best,
        gamma,
        iterations,
        warnings,
    })
}

fn restrict_eta(assignment: &Assignment, eta: &Normalizers) -> Normalizers {
    let (ll, mm, nn) = assignment.dims();
    let mut out = Normalizers::zeros(ll, mm, nn);
    for (l, m, n) in assignment.triples() {
        out.set(l, m, n, eta.get(l, m, n));
    }
    out
}

/// Largest `d ∈ 0..=d_max` accepted by `accept`, assuming acceptance is
/// monotone (accepted values form a prefix). Probes `⌈(lo + hi)/2⌉` with `hi`
/// exclusive so that `d_max` itself is reachable.
pub fn bisect<E>(d_max: usize, mut accept: impl FnMut(usize) -> Result<bool, E>) -> Result<(usize, Vec<usize>), E> {
    let (mut lo, mut hi) = (0usize, d_max + 1);
    let mut probes = Vec::new();
    while hi - lo > 1 {
        let d = (lo + hi).div_ceil(2);
        probes.push(d);
        if accept(d)? {
            lo = d;
        } else {
            hi = d;
        }
    }
    Ok((lo, probes))
}

mod finite_or_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub d: usize,
    /// Infinite when the schedule could not host `d` tasks; written as null.
    #[serde(with = "finite_or_null")]
    pub gamma: f64,
    pub accepted: bool,
    pub iterations: usize,
    pub gamma_trace: Vec<f64>,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub d_star: usize,
    pub upper_bound: usize,
    /// `Γ` of the returned state (zero when nothing was accepted).
    pub gamma: f64,
    /// Last accepted state, or an empty schedule on the initial trajectories
    /// when no task count was feasible.
    pub state: BcdState,
    pub probes: Vec<ProbeRecord>,
    pub calls: CallCounts,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

fn empty_state(scenario: &Scenario, pipeline: &Pipeline) -> BcdState {
    let (ll, mm, nn) = (scenario.num_clusters(), scenario.num_uavs, scenario.num_slots());
    BcdState {
        assignment: Assignment::new(ll, mm, nn),
        power: PowerPlan::zeros(scenario.num_devices(), nn),
        eta: Normalizers::zeros(ll, mm, nn),
        trajectories: pipeline
            .pinned
            .clone()
            .unwrap_or_else(|| repair_collisions(&circular_trajectories(scenario), scenario.phys.dmin)),
        gamma_history: vec![0.0],
    }
}

/// Runs one probe: initialization plus BCD, stopping early once `Γ ≤ 1`.
pub fn probe(
    scenario: &Scenario,
    d: usize,
    pipeline: &Pipeline,
    opts: &BcdOptions,
    carried: Option<&TrajectorySet>,
    counts: &mut CallCounts,
) -> Result<(ProbeRecord, BcdState), SolveError> {
    let start = Instant::now();
    let init = init_state(scenario, d, pipeline, opts, carried);
    let run = match init {
        Ok(init) => bcd_solve(scenario, d, pipeline, opts, init, Some(1.0), counts),
        Err(e) => Err(e),
    };
    match run {
        Ok(run) => Ok((
            ProbeRecord {
                d,
                gamma: run.gamma,
                accepted: run.gamma <= 1.0,
                iterations: run.iterations,
                gamma_trace: run.trace,
                seconds: start.elapsed().as_secs_f64(),
                warnings: run.warnings,
            },
            run.state,
        )),
        // A task count the schedule cannot host is a rejection, not a fault.
        Err(SolveError::Scheduling(e)) => Ok((
            ProbeRecord {
                d,
                gamma: f64::INFINITY,
                accepted: false,
                iterations: 0,
                gamma_trace: Vec::new(),
                seconds: start.elapsed().as_secs_f64(),
                warnings: vec![e.to_string()],
            },
            empty_state(scenario, pipeline),
        )),
        Err(e) => Err(e),
    }
}

/// Largest per-cluster task count whose BCD run reaches `Γ ≤ 1`.
pub fn bisection_solve(scenario: &Scenario, pipeline: &Pipeline, opts: &BcdOptions) -> Result<SolveOutcome, SolveError> {
    let violations = crate::scenario::validate(scenario);
    if !violations.is_empty() {
        return Err(SolveError::InvalidScenario(violations));
    }
    if let Some(p) = &pipeline.pinned {
        if p.num_uavs() != scenario.num_uavs || p.num_slots() != scenario.num_slots() {
            return Err(SolveError::Pinned(format!(
                "shape {}x{} does not match {} UAVs and {} slots",
                p.num_uavs(),
                p.num_slots(),
                scenario.num_uavs,
                scenario.num_slots()
            )));
        }
        if let Some(e) = p.collision_violation(scenario.phys.dmin, 1e-6) {
            return Err(SolveError::Pinned(e.to_string()));
        }
    }
    let start = Instant::now();
    let upper_bound = max_task_count(scenario);
    let mut counts = CallCounts::default();
    let mut probes = Vec::new();
    let mut accepted: Option<BcdState> = None;
    let (d_star, _) = bisect(upper_bound, |d| {
        let carried = if opts.warm_start {
            accepted.as_ref().map(|s| s.trajectories.clone())
        } else {
            None
        };
        let (record, state) = probe(scenario, d, pipeline, opts, carried.as_ref(), &mut counts)?;
        log::info!("probe D={d}: Γ={:.6} accepted={}", record.gamma, record.accepted);
        let ok = record.accepted;
        probes.push(record);
        if ok {
            accepted = Some(state);
        }
        Ok::<bool, SolveError>(ok)
    })?;
    let (state, diagnostic) = match accepted {
        Some(s) => (s, None),
        None => (
            empty_state(scenario, pipeline),
            Some("no task count reached the MSE targets; D = 1 was rejected".to_string()),
        ),
    };
    let gamma = if d_star == 0 { 0.0 } else { state.gamma() };
    Ok(SolveOutcome {
        d_star,
        upper_bound,
        gamma,
        state,
        probes,
        calls: counts,
        seconds: start.elapsed().as_secs_f64(),
        diagnostic,
    })
}

/// Converged BCD `Γ` for each task count in `ds`.
pub fn gamma_profile(
    scenario: &Scenario,
    ds: &[usize],
    pipeline: &Pipeline,
    opts: &BcdOptions,
) -> Result<Vec<(usize, f64)>, SolveError> {
    let mut counts = CallCounts::default();
    ds.iter()
        .map(|&d| {
            let init = init_state(scenario, d, pipeline, opts, None)?;
            let run = bcd_solve(scenario, d, pipeline, opts, init, None, &mut counts)?;
            Ok((d, run.gamma))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::generate_paper_scenario;

    #[test]
    fn bisection_on_linear_oracle() {
        let (d, probes) = bisect(20, |d| Ok::<_, ()>(d as f64 / 10.0 <= 1.0)).unwrap();
        assert_eq!(d, 10);
        assert!(probes.len() <= 5, "{probes:?}");
    }

    #[test]
    fn bisection_reaches_both_ends() {
        assert_eq!(bisect(7, |_| Ok::<_, ()>(true)).unwrap().0, 7);
        assert_eq!(bisect(7, |_| Ok::<_, ()>(false)).unwrap().0, 0);
        assert_eq!(bisect(0, |_| Ok::<_, ()>(true)).unwrap(), (0, vec![]));
    }

    #[test]
    fn paper_upper_bounds() {
        let s = generate_paper_scenario(150.0, 1, 0.8, 1).unwrap();
        assert_eq!(max_task_count(&s), 50);
        let s = generate_paper_scenario(80.0, 2, 0.8, 1).unwrap();
        assert_eq!(max_task_count(&s), 53);
    }

    #[test]
    fn circles_respect_speed() {
        let s = generate_paper_scenario(20.0, 2, 0.8, 3).unwrap();
        let q = circular_trajectories(&s);
        assert!(q.max_step() <= s.phys.max_step());
        assert!(q.speed_violation(&s.phys, 0.0).is_none());
    }

    #[test]
    fn init_spends_full_budget() {
        let s = generate_paper_scenario(10.0, 1, 0.8, 2).unwrap();
        let st = init_state(&s, 3, &Pipeline::default(), &BcdOptions::default(), None).unwrap();
        for k in 0..s.num_devices() {
            assert!((st.power.total(k) - 0.8).abs() < 1e-12);
        }
        let g = channel::gains(&s, &st.trajectories).unwrap();
        assert_eq!(st.eta, optimal_eta(&s, &st.assignment, &st.power, &g));
    }

    #[test]
    fn round_robin_counts() {
        let s = generate_paper_scenario(10.0, 2, 0.8, 2).unwrap();
        let a = round_robin(&s, 6, SlotRule::PerUav);
        for l in 0..6 {
            assert_eq!(a.cluster_count(l), 6);
        }
        assert!(a.structure_violations(SlotRule::PerUav).is_empty());
    }

    #[test]
    fn task_count_range_checked() {
        let s = generate_paper_scenario(10.0, 1, 0.8, 2).unwrap();
        assert!(matches!(
            init_state(&s, 4, &Pipeline::default(), &BcdOptions::default(), None),
            Err(SolveError::TaskCount { .. })
        ));
    }
}
