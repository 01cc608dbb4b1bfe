//! Cluster scheduling and UAV association for a fixed power plan, set of
//! normalizers and trajectories.
//!
//! The binary program is solved by Lagrangian dual ascent: each cluster picks
//! its `D` cheapest (UAV, slot) pairs under the current prices, the prices are
//! moved along the subgradient, and the best feasible iterate is kept. A final
//! exact pass (bottleneck threshold search plus min-cost flow) removes any
//! residual duality gap; the gap is reported alongside the result.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{mse_triple_with, ChannelGains};
use crate::normalizing::Normalizers;
use crate::power::PowerPlan;
use crate::scenario::Scenario;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchedulingError {
    #[error("task count {d} exceeds the {available} (UAV, slot) pairs available to a cluster")]
    TooManyTasks { d: usize, available: usize },
    #[error("no assignment gives every cluster {d} tasks under the {rule:?} slot rule")]
    Infeasible { d: usize, rule: SlotRule },
    #[error("cost tensor has {got} entries, expected {expected}")]
    Shape { expected: usize, got: usize },
}

/// How many clusters a slot may serve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotRule {
    /// Each UAV serves at most one cluster per slot.
    #[default]
    PerUav,
    /// At most one (cluster, UAV) pair per slot network-wide.
    Orthogonal,
}

/// Binary tensor `a_{l,m}[n]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    num_clusters: usize,
    num_uavs: usize,
    num_slots: usize,
    active: Vec<bool>,
}

impl Assignment {
    pub fn new(num_clusters: usize, num_uavs: usize, num_slots: usize) -> Self {
        Assignment {
            num_clusters,
            num_uavs,
            num_slots,
            active: vec![false; num_clusters * num_uavs * num_slots],
        }
    }

    pub fn for_scenario(scenario: &Scenario) -> Self {
        Self::new(scenario.num_clusters(), scenario.num_uavs, scenario.num_slots())
    }

    #[inline]
    fn idx(&self, l: usize, m: usize, n: usize) -> usize {
        (l * self.num_uavs + m) * self.num_slots + n
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize, n: usize) -> bool {
        self.active[self.idx(l, m, n)]
    }

    pub fn set(&mut self, l: usize, m: usize, n: usize, on: bool) {
        let i = self.idx(l, m, n);
        self.active[i] = on;
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.num_clusters, self.num_uavs, self.num_slots)
    }

    /// Active `(l, m, n)` triples in index order.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let (mm, nn) = (self.num_uavs, self.num_slots);
        self.active
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(move |(i, _)| (i / (mm * nn), (i / nn) % mm, i % nn))
    }

    pub fn cluster_count(&self, l: usize) -> usize {
        (0..self.num_uavs)
            .map(|m| (0..self.num_slots).filter(|&n| self.get(l, m, n)).count())
            .sum()
    }

    pub fn min_cluster_count(&self) -> usize {
        (0..self.num_clusters).map(|l| self.cluster_count(l)).min().unwrap_or(0)
    }

    pub fn uav_for(&self, l: usize, n: usize) -> Option<usize> {
        (0..self.num_uavs).find(|&m| self.get(l, m, n))
    }

    pub fn cluster_at(&self, m: usize, n: usize) -> Option<usize> {
        (0..self.num_clusters).find(|&l| self.get(l, m, n))
    }

    pub fn cluster_active(&self, l: usize, n: usize) -> bool {
        self.uav_for(l, n).is_some()
    }

    /// Human-readable descriptions of every violated structural constraint.
    pub fn structure_violations(&self, rule: SlotRule) -> Vec<String> {
        let mut out = Vec::new();
        let per_slot = self.slot_counts();
        for n in 0..self.num_slots {
            for l in 0..self.num_clusters {
                let c = (0..self.num_uavs).filter(|&m| self.get(l, m, n)).count();
                if c > 1 {
                    out.push(format!("cluster {} served by {c} UAVs in slot {n}", l + 1));
                }
            }
            for m in 0..self.num_uavs {
                let c = (0..self.num_clusters).filter(|&l| self.get(l, m, n)).count();
                if c > 1 {
                    out.push(format!("UAV {} serves {c} clusters in slot {n}", m + 1));
                }
            }
            if rule == SlotRule::Orthogonal {
                let c = per_slot[n];
                if c > 1 {
                    out.push(format!("{c} associations in orthogonal slot {n}"));
                }
            }
        }
        out
    }

    /// Number of active associations in each slot.
    pub fn slot_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_slots];
        for (_, _, n) in self.triples() {
            counts[n] += 1;
        }
        counts
    }
}

/// Achievable-MSE-to-target ratio of every hypothetical association.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTensor {
    pub num_clusters: usize,
    pub num_uavs: usize,
    pub num_slots: usize,
    pub ratios: Vec<f64>,
}

impl CostTensor {
    pub fn new(
        num_clusters: usize,
        num_uavs: usize,
        num_slots: usize,
        ratios: Vec<f64>,
    ) -> Result<Self, SchedulingError> {
        let expected = num_clusters * num_uavs * num_slots;
        if ratios.len() != expected {
            return Err(SchedulingError::Shape {
                expected,
                got: ratios.len(),
            });
        }
        Ok(CostTensor {
            num_clusters,
            num_uavs,
            num_slots,
            ratios,
        })
    }

    #[inline]
    pub fn get(&self, l: usize, m: usize, n: usize) -> f64 {
        self.ratios[(l * self.num_uavs + m) * self.num_slots + n]
    }

    /// Largest ratio over the active entries of `a`.
    pub fn bottleneck(&self, a: &Assignment) -> f64 {
        a.triples().map(|(l, m, n)| self.get(l, m, n)).fold(0.0, f64::max)
    }
}

/// Ratios computed with every `a_{l,m}[n]` forced to one and the stored
/// normalizers; interference uses the given power plan as is.
pub fn hypothetical_ratios(
    scenario: &Scenario,
    gains: &ChannelGains,
    power: &PowerPlan,
    eta: &Normalizers,
) -> CostTensor {
    let ranges = scenario.cluster_ranges();
    let cluster_of = scenario.device_clusters();
    let (ll, mm, nn) = (scenario.num_clusters(), scenario.num_uavs, scenario.num_slots());
    let mut ratios = Vec::with_capacity(ll * mm * nn);
    for l in 0..ll {
        let eps = scenario.clusters[l].epsilon;
        for m in 0..mm {
            for n in 0..nn {
                let b = mse_triple_with(scenario, &ranges, &cluster_of, l, m, n, eta.get(l, m, n), power, gains);
                ratios.push(b.total / eps);
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

/// Multipliers of the relaxed scheduling problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    /// `λ_{l,n}`, indexed `l * N + n`.
    pub lambda: Vec<f64>,
    /// `β_{l,n}`, indexed `l * N + n`.
    pub beta: Vec<f64>,
    /// `ν_{m,n}`, indexed `m * N + n`.
    pub nu: Vec<f64>,
    /// Per-slot multipliers of the orthogonal rule; unused otherwise.
    pub omega: Vec<f64>,
    pub iteration: usize,
}

impl DualState {
    pub fn initial(num_clusters: usize, num_uavs: usize, num_slots: usize) -> Self {
        let ln = num_clusters * num_slots;
        DualState {
            lambda: vec![1.0 / ln as f64; ln],
            beta: vec![0.0; ln],
            nu: vec![0.0; num_uavs * num_slots],
            omega: vec![0.0; num_slots],
            iteration: 0,
        }
    }

    fn max_change(&self, other: &DualState) -> f64 {
        let pairs = [
            (&self.lambda, &other.lambda),
            (&self.beta, &other.beta),
            (&self.nu, &other.nu),
            (&self.omega, &other.omega),
        ];
        pairs
            .iter()
            .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

fn priced(costs: &CostTensor, dual: &DualState, rule: SlotRule) -> Vec<f64> {
    let (mm, nn) = (costs.num_uavs, costs.num_slots);
    let mut x = Vec::with_capacity(costs.ratios.len());
    for l in 0..costs.num_clusters {
        for m in 0..mm {
            for n in 0..nn {
                let mut v = dual.lambda[l * nn + n] * costs.get(l, m, n) + dual.beta[l * nn + n] + dual.nu[m * nn + n];
                if rule == SlotRule::Orthogonal {
                    v += dual.omega[n];
                }
                x.push(v);
            }
        }
    }
    x
}

fn check_count(costs: &CostTensor, d: usize) -> Result<(), SchedulingError> {
    let available = costs.num_uavs * costs.num_slots;
    if d > available {
        return Err(SchedulingError::TooManyTasks { d, available });
    }
    Ok(())
}

/// Per-cluster choice of the `d` smallest priced entries, ties broken by
/// ascending `(n, m)`.
fn top_d(x: &[f64], costs: &CostTensor, d: usize) -> Assignment {
    let (ll, mm, nn) = (costs.num_clusters, costs.num_uavs, costs.num_slots);
    let mut a = Assignment::new(ll, mm, nn);
    let mut order: Vec<(usize, usize)> = Vec::with_capacity(mm * nn);
    for l in 0..ll {
        order.clear();
        order.extend((0..nn).flat_map(|n| (0..mm).map(move |m| (m, n))));
        let base = l * mm * nn;
        order.sort_by(|&(m1, n1), &(m2, n2)| {
            x[base + m1 * nn + n1]
                .total_cmp(&x[base + m2 * nn + n2])
                .then(n1.cmp(&n2))
                .then(m1.cmp(&m2))
        });
        for &(m, n) in order.iter().take(d) {
            a.set(l, m, n, true);
        }
    }
    a
}

/// Primal minimizer of the Lagrangian for the given multipliers.
pub fn primal_update(
    costs: &CostTensor,
    dual: &DualState,
    d: usize,
    rule: SlotRule,
) -> Result<(Assignment, f64), SchedulingError> {
    check_count(costs, d)?;
    let x = priced(costs, dual, rule);
    let a = top_d(&x, costs, d);
    let gamma = costs.bottleneck(&a);
    Ok((a, gamma))
}

/// One projected subgradient step on the multipliers.
pub fn dual_update(
    dual: &DualState,
    assignment: &Assignment,
    costs: &CostTensor,
    gamma: f64,
    step: f64,
    rule: SlotRule,
) -> DualState {
    let (ll, mm, nn) = (costs.num_clusters, costs.num_uavs, costs.num_slots);
    let mut next = dual.clone();
    next.iteration += 1;
    for l in 0..ll {
        for n in 0..nn {
            let i = l * nn + n;
            let mut served = 0.0;
            let mut excess = 0.0;
            for m in 0..mm {
                if assignment.get(l, m, n) {
                    served += 1.0;
                    excess += costs.get(l, m, n) - gamma;
                }
            }
            next.beta[i] = (dual.beta[i] + step * (served - 1.0)).max(0.0);
            next.lambda[i] = (dual.lambda[i] + step * excess).max(0.0);
        }
    }
    for m in 0..mm {
        for n in 0..nn {
            let served = (0..ll).filter(|&l| assignment.get(l, m, n)).count() as f64;
            let i = m * nn + n;
            next.nu[i] = (dual.nu[i] + step * (served - 1.0)).max(0.0);
        }
    }
    if rule == SlotRule::Orthogonal {
        for (n, served) in assignment.slot_counts().into_iter().enumerate() {
            next.omega[n] = (dual.omega[n] + step * (served as f64 - 1.0)).max(0.0);
        }
    }
    let total: f64 = next.lambda.iter().sum();
    if total > 0.0 {
        next.lambda.iter_mut().for_each(|v| *v /= total);
    } else {
        let u = 1.0 / next.lambda.len() as f64;
        next.lambda.iter_mut().for_each(|v| *v = u);
    }
    next
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchedulingOptions {
    pub max_iters: usize,
    pub tol: f64,
    pub step0: f64,
    /// Run the exact bottleneck pass after the dual iterations.
    pub polish: bool,
}

impl Default for SchedulingOptions {
    fn default() -> Self {
        SchedulingOptions {
            max_iters: 5000,
            tol: 1e-6,
            step0: 1.0,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleResult {
    pub assignment: Assignment,
    pub gamma: f64,
    /// Bottleneck ratio of the best feasible assignment found by the dual
    /// iterations (after repair).
    pub dual_gamma: f64,
    pub iterations: usize,
    pub converged: bool,
    /// The dual iterate needed the greedy repair pass.
    pub repaired: bool,
}

impl ScheduleResult {
    pub fn duality_gap(&self) -> f64 {
        self.dual_gamma - self.gamma
    }
}

fn is_feasible(a: &Assignment, d: usize, rule: SlotRule) -> bool {
    let (ll, _, _) = a.dims();
    (0..ll).all(|l| a.cluster_count(l) == d) && a.structure_violations(rule).is_empty()
}

/// Greedy conflict resolution: entries are granted in ascending priced order
/// while the cluster still needs tasks and its slot and the UAV's slot are
/// free. Falls back to an exact flow when the greedy pass strands a cluster.
pub fn repair(x: &[f64], costs: &CostTensor, d: usize, rule: SlotRule) -> Result<Assignment, SchedulingError> {
    check_count(costs, d)?;
    let (ll, mm, nn) = (costs.num_clusters, costs.num_uavs, costs.num_slots);
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then((i % nn).cmp(&(j % nn))).then(i.cmp(&j)));
    let mut a = Assignment::new(ll, mm, nn);
    let mut count = vec![0usize; ll];
    let mut cluster_slot = vec![false; ll * nn];
    let mut uav_slot = vec![false; mm * nn];
    let mut slot = vec![false; nn];
    for i in order {
        let (l, m, n) = (i / (mm * nn), (i / nn) % mm, i % nn);
        if count[l] >= d || cluster_slot[l * nn + n] || uav_slot[m * nn + n] {
            continue;
        }
        if rule == SlotRule::Orthogonal && slot[n] {
            continue;
        }
        a.set(l, m, n, true);
        count[l] += 1;
        cluster_slot[l * nn + n] = true;
        uav_slot[m * nn + n] = true;
        slot[n] = true;
    }
    if count.iter().all(|&c| c == d) {
        return Ok(a);
    }
    min_bottleneck_assignment(costs, d, rule).map(|(a, _)| a)
}

/// Dual ascent followed by the exact bottleneck pass.
pub fn solve_scheduling(
    costs: &CostTensor,
    d: usize,
    rule: SlotRule,
    opts: &SchedulingOptions,
) -> Result<ScheduleResult, SchedulingError> {
    check_count(costs, d)?;
    let (ll, mm, nn) = (costs.num_clusters, costs.num_uavs, costs.num_slots);
    if d == 0 {
        return Ok(ScheduleResult {
            assignment: Assignment::new(ll, mm, nn),
            gamma: 0.0,
            dual_gamma: 0.0,
            iterations: 0,
            converged: true,
            repaired: false,
        });
    }
    let mut dual = DualState::initial(ll, mm, nn);
    let mut best: Option<(Assignment, f64)> = None;
    let mut converged = false;
    let mut last_x = Vec::new();
    let mut iterations = 0;
    for t in 1..=opts.max_iters {
        iterations = t;
        let x = priced(costs, &dual, rule);
        let a = top_d(&x, costs, d);
        let gamma = costs.bottleneck(&a);
        if is_feasible(&a, d, rule) && best.as_ref().is_none_or(|(_, g)| gamma < *g) {
            best = Some((a.clone(), gamma));
        }
        let step = opts.step0 / (t as f64).sqrt();
        let next = dual_update(&dual, &a, costs, gamma, step, rule);
        let change = next.max_change(&dual);
        dual = next;
        last_x = x;
        if change < opts.tol {
            converged = true;
            break;
        }
    }
    let mut repaired = false;
    let (dual_assignment, dual_gamma) = match best {
        Some(b) => b,
        None => {
            repaired = true;
            let a = repair(&last_x, costs, d, rule)?;
            let g = costs.bottleneck(&a);
            (a, g)
        }
    };
    if !opts.polish {
        return Ok(ScheduleResult {
            assignment: dual_assignment,
            gamma: dual_gamma,
            dual_gamma,
            iterations,
            converged,
            repaired,
        });
    }
    let (assignment, gamma) = match min_bottleneck_assignment(costs, d, rule) {
        Ok((a, g)) if g <= dual_gamma => (a, g),
        _ => (dual_assignment, dual_gamma),
    };
    if dual_gamma > gamma {
        log::debug!("scheduling duality gap {:.3e} closed by exact pass", dual_gamma - gamma);
    }
    Ok(ScheduleResult {
        assignment,
        gamma,
        dual_gamma,
        iterations,
        converged,
        repaired,
    })
}

/// Exact minimizer of the bottleneck ratio with `d` tasks per cluster; among
/// bottleneck-optimal assignments the one with the smallest ratio sum.
pub fn min_bottleneck_assignment(
    costs: &CostTensor,
    d: usize,
    rule: SlotRule,
) -> Result<(Assignment, f64), SchedulingError> {
    check_count(costs, d)?;
    let (ll, mm, nn) = (costs.num_clusters, costs.num_uavs, costs.num_slots);
    if d == 0 {
        return Ok((Assignment::new(ll, mm, nn), 0.0));
    }
    let capacity = match rule {
        SlotRule::PerUav => mm * nn,
        SlotRule::Orthogonal => nn,
    };
    if ll * d > capacity {
        return Err(SchedulingError::Infeasible { d, rule });
    }
    let mut thresholds: Vec<f64> = costs.ratios.iter().copied().filter(|r| r.is_finite()).collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    // No cluster can beat its own d-th smallest ratio.
    let floor = (0..ll)
        .map(|l| {
            let mut own: Vec<f64> = (0..mm)
                .flat_map(|m| (0..nn).map(move |n| (m, n)))
                .map(|(m, n)| costs.get(l, m, n))
                .collect();
            own.sort_by(f64::total_cmp);
            own[d - 1]
        })
        .fold(0.0, f64::max);
    let mut lo = thresholds.partition_point(|&t| t < floor);
    let mut hi = thresholds.len();
    let flow_at = |tau: f64| -> Option<Assignment> {
        let net = FlowNetwork::build(costs, d, rule, tau);
        net.solve(ll * d)
    };
    // Smallest threshold index whose network carries the full flow.
    while lo < hi {
        let mid = (lo + hi) / 2;
        if flow_at(thresholds[mid]).is_some() {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    if lo == thresholds.len() {
        return Err(SchedulingError::Infeasible { d, rule });
    }
    let a = flow_at(thresholds[lo]).ok_or(SchedulingError::Infeasible { d, rule })?;
    let g = costs.bottleneck(&a);
    Ok((a, g))
}

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: u32,
    cost: f64,
    rev: usize,
}

/// Source → cluster (cap d) → (cluster, slot) → (UAV, slot) [→ slot] → sink.
struct FlowNetwork {
    graph: Vec<Vec<Edge>>,
    source: usize,
    sink: usize,
    /// `(l, m, n, node, edge index)` of every association edge.
    arcs: Vec<(usize, usize, usize, usize, usize)>,
    dims: (usize, usize, usize),
}

impl FlowNetwork {
    fn build(costs: &CostTensor, d: usize, rule: SlotRule, tau: f64) -> Self {
        let (ll, mm, nn) = (costs.num_clusters, costs.num_uavs, costs.num_slots);
        let source = 0;
        let cluster0 = 1;
        let ln0 = cluster0 + ll;
        let mn0 = ln0 + ll * nn;
        let slot0 = mn0 + mm * nn;
        let sink = slot0 + if rule == SlotRule::Orthogonal { nn } else { 0 };
        let mut net = FlowNetwork {
            graph: vec![Vec::new(); sink + 1],
            source,
            sink,
            arcs: Vec::new(),
            dims: (ll, mm, nn),
        };
        for l in 0..ll {
            net.add(source, cluster0 + l, d as u32, 0.0);
            for n in 0..nn {
                net.add(cluster0 + l, ln0 + l * nn + n, 1, 0.0);
            }
        }
        for l in 0..ll {
            for m in 0..mm {
                for n in 0..nn {
                    let r = costs.get(l, m, n);
                    if r <= tau {
                        let from = ln0 + l * nn + n;
                        let e = net.add(from, mn0 + m * nn + n, 1, r);
                        net.arcs.push((l, m, n, from, e));
                    }
                }
            }
        }
        for m in 0..mm {
            for n in 0..nn {
                match rule {
                    SlotRule::PerUav => net.add(mn0 + m * nn + n, sink, 1, 0.0),
                    SlotRule::Orthogonal => net.add(mn0 + m * nn + n, slot0 + n, 1, 0.0),
                };
            }
        }
        if rule == SlotRule::Orthogonal {
            for n in 0..nn {
                net.add(slot0 + n, sink, 1, 0.0);
            }
        }
        net
    }

    fn add(&mut self, from: usize, to: usize, cap: u32, cost: f64) -> usize {
        let fwd = self.graph[from].len();
        let back = self.graph[to].len();
        self.graph[from].push(Edge { to, cap, cost, rev: back });
        self.graph[to].push(Edge {
            to: from,
            cap: 0,
            cost: -cost,
            rev: fwd,
        });
        fwd
    }

    /// Successive shortest paths with Johnson potentials. Returns the
    /// assignment if `demand` units reach the sink.
    fn solve(mut self, demand: usize) -> Option<Assignment> {
        let v = self.graph.len();
        let mut potential = vec![0.0; v];
        let mut dist = vec![f64::INFINITY; v];
        let mut prev: Vec<(usize, usize)> = vec![(usize::MAX, usize::MAX); v];
        for _ in 0..demand {
            dist.iter_mut().for_each(|x| *x = f64::INFINITY);
            dist[self.source] = 0.0;
            let mut heap = BinaryHeap::new();
            heap.push(HeapItem(0.0, self.source));
            while let Some(HeapItem(dd, u)) = heap.pop() {
                if dd > dist[u] {
                    continue;
                }
                for (ei, e) in self.graph[u].iter().enumerate() {
                    if e.cap == 0 {
                        continue;
                    }
                    // Reduced costs are non-negative up to rounding.
                    let nd = dd + (e.cost + potential[u] - potential[e.to]).max(0.0);
                    if nd < dist[e.to] {
                        dist[e.to] = nd;
                        prev[e.to] = (u, ei);
                        heap.push(HeapItem(nd, e.to));
                    }
                }
            }
            if !dist[self.sink].is_finite() {
                return None;
            }
            for (p, d) in potential.iter_mut().zip(&dist) {
                if d.is_finite() {
                    *p += d;
                }
            }
            let mut node = self.sink;
            while node != self.source {
                let (u, ei) = prev[node];
                let rev = self.graph[u][ei].rev;
                self.graph[u][ei].cap -= 1;
                self.graph[node][rev].cap += 1;
                node = u;
            }
        }
        let (ll, mm, nn) = self.dims;
        let mut a = Assignment::new(ll, mm, nn);
        for &(l, m, n, from, e) in &self.arcs {
            if self.graph[from][e].cap == 0 {
                a.set(l, m, n, true);
            }
        }
        Some(a)
    }
}

#[derive(PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0).then(other.1.cmp(&self.1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(l: usize, m: usize, n: usize, r: &[f64]) -> CostTensor {
        CostTensor::new(l, m, n, r.to_vec()).unwrap()
    }

    #[test]
    fn top_two_smallest() {
        let c = tensor(1, 1, 3, &[0.5, 0.2, 0.9]);
        let dual = DualState::initial(1, 1, 3);
        let (a, g) = primal_update(&c, &dual, 2, SlotRule::PerUav).unwrap();
        assert!(a.get(0, 0, 0) && a.get(0, 0, 1) && !a.get(0, 0, 2));
        assert_eq!(g, 0.5);
    }

    #[test]
    fn ties_pick_earliest_slots() {
        let c = tensor(1, 2, 3, &[0.3; 6]);
        let dual = DualState::initial(1, 2, 3);
        let (a, _) = primal_update(&c, &dual, 3, SlotRule::PerUav).unwrap();
        let picked: Vec<_> = a.triples().map(|(_, m, n)| (n, m)).collect();
        let mut picked = picked;
        picked.sort();
        assert_eq!(picked, vec![(0, 0), (0, 1), (1, 0)]);
    }

    #[test]
    fn too_many_tasks() {
        let c = tensor(1, 1, 3, &[0.1, 0.2, 0.3]);
        assert!(matches!(
            primal_update(&c, &DualState::initial(1, 1, 3), 4, SlotRule::PerUav),
            Err(SchedulingError::TooManyTasks { .. })
        ));
    }

    #[test]
    fn slack_constraints_shrink_prices() {
        let c = tensor(2, 2, 2, &[0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]);
        let mut dual = DualState::initial(2, 2, 2);
        dual.beta.iter_mut().for_each(|b| *b = 0.5);
        dual.nu.iter_mut().for_each(|b| *b = 0.5);
        let a = Assignment::new(2, 2, 2);
        let next = dual_update(&dual, &a, &c, 0.0, 0.1, SlotRule::PerUav);
        for (x, y) in next.beta.iter().zip(&dual.beta) {
            assert!(x <= y);
        }
        for (x, y) in next.nu.iter().zip(&dual.nu) {
            assert!(x <= y);
        }
    }

    #[test]
    fn lambda_stays_uniform_and_normalized() {
        let c = tensor(2, 1, 2, &[0.4; 4]);
        let dual = DualState::initial(2, 1, 2);
        let (a, g) = primal_update(&c, &dual, 1, SlotRule::PerUav).unwrap();
        let next = dual_update(&dual, &a, &c, g, 0.7, SlotRule::PerUav);
        assert!((next.lambda.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for v in &next.lambda {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn initial_lambda_uniform() {
        let d = DualState::initial(3, 2, 4);
        assert!(d.lambda.iter().all(|&v| (v - 1.0 / 12.0).abs() < 1e-18));
        assert!(d.beta.iter().chain(&d.nu).all(|&v| v == 0.0));
    }

    #[test]
    fn single_cluster_matches_sort() {
        let r = [0.9, 0.1, 0.5, 0.7, 0.3, 0.2];
        let c = tensor(1, 1, 6, &r);
        let res = solve_scheduling(&c, 3, SlotRule::PerUav, &SchedulingOptions::default()).unwrap();
        let mut sorted = r.to_vec();
        sorted.sort_by(f64::total_cmp);
        assert_eq!(res.gamma, sorted[2]);
        assert_eq!(res.assignment.cluster_count(0), 3);
    }

    #[test]
    fn conflicting_clusters_are_separated() {
        // Both clusters prefer slot 0 of the only UAV.
        let c = tensor(2, 1, 2, &[0.1, 0.8, 0.2, 0.3]);
        let res = solve_scheduling(&c, 1, SlotRule::PerUav, &SchedulingOptions::default()).unwrap();
        assert!(res.assignment.structure_violations(SlotRule::PerUav).is_empty());
        assert!((res.gamma - 0.3).abs() < 1e-12);
    }

    #[test]
    fn orthogonal_rule_limits_slot_use() {
        let c = tensor(2, 2, 2, &[0.1, 0.2, 0.1, 0.2, 0.1, 0.2, 0.1, 0.2]);
        let res = solve_scheduling(&c, 1, SlotRule::Orthogonal, &SchedulingOptions::default()).unwrap();
        for n in 0..2 {
            assert!(res.assignment.triples().filter(|t| t.2 == n).count() <= 1);
        }
        assert!(matches!(
            min_bottleneck_assignment(&c, 2, SlotRule::Orthogonal),
            Err(SchedulingError::Infeasible { .. })
        ));
    }

    #[test]
    fn repair_resolves_conflicts() {
        let c = tensor(2, 1, 3, &[0.1, 0.2, 0.9, 0.1, 0.3, 0.4]);
        let a = repair(&c.ratios, &c, 1, SlotRule::PerUav).unwrap();
        assert!(a.structure_violations(SlotRule::PerUav).is_empty());
        assert_eq!(a.cluster_count(0), 1);
        assert_eq!(a.cluster_count(1), 1);
    }

    #[test]
    fn zero_tasks() {
        let c = tensor(1, 1, 2, &[0.1, 0.2]);
        let res = solve_scheduling(&c, 0, SlotRule::PerUav, &SchedulingOptions::default()).unwrap();
        assert_eq!(res.assignment.triples().count(), 0);
        assert_eq!(res.gamma, 0.0);
    }
}
