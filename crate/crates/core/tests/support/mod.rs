//! Independent reference implementations used by the integration tests.
//! Nothing here calls into the solver modules; geometry and MSE are
//! recomputed from the raw scenario.
#![allow(dead_code, clippy::needless_range_loop)]

use aircomp_core::normalizing::Normalizers;
use aircomp_core::power::PowerPlan;
use aircomp_core::scenario::{generate_desk_scenario, PhysParams, Point, Scenario};
use aircomp_core::scheduling::{Assignment, SlotRule};
use aircomp_core::trajectory::TrajectorySet;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// `|h|²` from the path-loss law.
pub fn power_gain(phys: &PhysParams, q: Point, w: Point) -> f64 {
    let d2 = phys.altitude.powi(2) + (q[0] - w[0]).powi(2) + (q[1] - w[1]).powi(2);
    phys.beta0 * d2.powf(-phys.gamma / 2.0)
}

/// Desk-style instance cut down to `l` clusters of at most `k` devices over
/// `n` slots.
pub fn small_scenario(r: &mut ChaCha8Rng, l: usize, k: usize, n: usize, m: usize) -> Scenario {
    let mut s = generate_desk_scenario(n as f64 * 0.5, m.min(3), 0.1 + 0.9 * r.random::<f64>(), r.random()).unwrap();
    s.num_uavs = m;
    s.clusters.truncate(l);
    for c in &mut s.clusters {
        let keep = r.random_range(1..=k);
        c.devices.truncate(keep);
    }
    s
}

pub fn random_trajectories(r: &mut ChaCha8Rng, m: usize, n: usize) -> TrajectorySet {
    let positions = (0..m)
        .map(|_| {
            (0..n)
                .map(|_| [r.random_range(-200.0..300.0), r.random_range(-100.0..300.0)])
                .collect()
        })
        .collect();
    TrajectorySet::new(positions).unwrap()
}

/// Random schedule obeying the slot rule, every cluster active at least once
/// when possible.
pub fn random_assignment(r: &mut ChaCha8Rng, l: usize, m: usize, n: usize, rule: SlotRule) -> Assignment {
    let mut a = Assignment::new(l, m, n);
    for slot in 0..n {
        let mut clusters: Vec<usize> = (0..l).collect();
        clusters.shuffle(r);
        let per_slot = if rule == SlotRule::Orthogonal { 1 } else { m };
        for (uav, &c) in clusters.iter().take(per_slot).enumerate() {
            if r.random::<f64>() < 0.75 {
                let u = if rule == SlotRule::Orthogonal { r.random_range(0..m) } else { uav };
                a.set(c, u, slot, true);
            }
        }
    }
    a
}

/// Spends a random fraction of each budget over the device's active slots.
pub fn random_power(r: &mut ChaCha8Rng, s: &Scenario, a: &Assignment) -> PowerPlan {
    let n = s.num_slots();
    let mut p = PowerPlan::zeros(s.num_devices(), n);
    let mut k = 0;
    for (l, c) in s.clusters.iter().enumerate() {
        for dev in &c.devices {
            let slots: Vec<usize> = (0..n).filter(|&t| a.cluster_active(l, t)).collect();
            let w: Vec<f64> = slots.iter().map(|_| r.random::<f64>() + 0.05).collect();
            let total: f64 = w.iter().sum();
            let spend = dev.power_budget * r.random_range(0.2..1.0);
            for (&t, wi) in slots.iter().zip(&w) {
                p.set(k, t, spend * wi / total);
            }
            k += 1;
        }
    }
    p
}

pub struct Flat {
    pub cluster: Vec<usize>,
    pub pos: Vec<Point>,
    pub budget: Vec<f64>,
}

pub fn flatten(s: &Scenario) -> Flat {
    let mut f = Flat {
        cluster: Vec::new(),
        pos: Vec::new(),
        budget: Vec::new(),
    };
    for (l, c) in s.clusters.iter().enumerate() {
        for d in &c.devices {
            f.cluster.push(l);
            f.pos.push(d.position);
            f.budget.push(d.power_budget);
        }
    }
    f
}

/// MSE of cluster `l` at UAV `m` in slot `n` for a given `η`.
#[allow(clippy::too_many_arguments)]
pub fn mse_at(s: &Scenario, q: &TrajectorySet, power: &PowerPlan, l: usize, m: usize, n: usize, eta: f64) -> f64 {
    let f = flatten(s);
    let at = q.position(m, n);
    let mut own = 0.0;
    let mut size = 0.0;
    let mut leak = 0.0;
    for k in 0..f.pos.len() {
        let g = power_gain(&s.phys, at, f.pos[k]);
        let p = power.get(k, n);
        if f.cluster[k] == l {
            own += (eta * (g * p).sqrt() - 1.0).powi(2);
            size += 1.0;
        } else {
            leak += g * p;
        }
    }
    (own + eta * eta * (leak + s.phys.sigma2)) / (size * size)
}

/// Golden-section minimizer of `f` on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, rel_tol: f64) -> f64 {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    let width = hi - lo;
    while hi - lo > rel_tol * width {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    0.5 * (lo + hi)
}

/// Exhaustive min over feasible schedules of the worst scheduled ratio,
/// with every cluster served at least `d` times.
pub fn brute_force_schedule(ratios: &[f64], l: usize, m: usize, n: usize, d: usize, rule: SlotRule) -> Option<f64> {
    // Per-slot configurations: cluster -> uav (usize::MAX when idle).
    let mut configs: Vec<Vec<usize>> = Vec::new();
    let mut cur = vec![usize::MAX; l];
    fn rec(i: usize, l: usize, m: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == l {
            out.push(cur.clone());
            return;
        }
        cur[i] = usize::MAX;
        rec(i + 1, l, m, used, cur, out);
        for u in 0..m {
            if !used[u] {
                used[u] = true;
                cur[i] = u;
                rec(i + 1, l, m, used, cur, out);
                used[u] = false;
                cur[i] = usize::MAX;
            }
        }
    }
    rec(0, l, m, &mut vec![false; m], &mut cur, &mut configs);
    if rule == SlotRule::Orthogonal {
        configs.retain(|c| c.iter().filter(|&&u| u != usize::MAX).count() <= 1);
    }
    let ratio = |c: usize, u: usize, t: usize| ratios[(c * m + u) * n + t];
    let mut best: Option<f64> = None;
    let mut counts = vec![0usize; l];
    #[allow(clippy::too_many_arguments)]
    fn walk(
        t: usize,
        worst: f64,
        n: usize,
        d: usize,
        configs: &[Vec<usize>],
        counts: &mut Vec<usize>,
        ratio: &dyn Fn(usize, usize, usize) -> f64,
        best: &mut Option<f64>,
    ) {
        if best.is_some_and(|b| worst >= b) {
            return;
        }
        if t == n {
            if counts.iter().all(|&c| c >= d) {
                *best = Some(worst);
            }
            return;
        }
        for cfg in configs {
            let mut w = worst;
            for (c, &u) in cfg.iter().enumerate() {
                if u != usize::MAX {
                    counts[c] += 1;
                    w = w.max(ratio(c, u, t));
                }
            }
            walk(t + 1, w, n, d, configs, counts, ratio, best);
            for (c, &u) in cfg.iter().enumerate() {
                if u != usize::MAX {
                    counts[c] -= 1;
                }
            }
        }
    }
    walk(0, 0.0, n, d, &configs, &mut counts, &ratio, &mut best);
    best
}

/// Reference power allocation for a fixed schedule and normalizers:
/// minimizes a log-sum-exp smoothing of the worst ratio by projected
/// gradient in amplitudes `u = √p`, tightening the smoothing in stages.
/// Returns the true worst ratio at the final point.
pub fn power_oracle(s: &Scenario, a: &Assignment, eta: &Normalizers, q: &TrajectorySet, start: &PowerPlan) -> f64 {
    let f = flatten(s);
    let (kk, nn, mm) = (f.pos.len(), s.num_slots(), s.num_uavs);
    let sizes: Vec<f64> = s.clusters.iter().map(|c| c.devices.len() as f64).collect();
    // Active (cluster, uav, slot) triples.
    let triples: Vec<(usize, usize, usize)> = (0..s.clusters.len())
        .flat_map(|l| (0..mm).flat_map(move |m| (0..nn).map(move |n| (l, m, n))))
        .filter(|&(l, m, n)| a.get(l, m, n))
        .collect();
    let vars: Vec<(usize, usize)> = (0..kk)
        .flat_map(|k| (0..nn).map(move |n| (k, n)))
        .filter(|&(k, n)| a.cluster_active(f.cluster[k], n))
        .collect();
    let idx = |k: usize, n: usize| vars.iter().position(|&v| v == (k, n));
    let gain: Vec<Vec<f64>> = triples
        .iter()
        .map(|&(_, m, n)| (0..kk).map(|k| power_gain(&s.phys, q.position(m, n), f.pos[k])).collect())
        .collect();
    let ratios = |u: &[f64], grads: Option<&mut Vec<Vec<f64>>>| -> Vec<f64> {
        let mut out = Vec::with_capacity(triples.len());
        let mut gs = Vec::new();
        for (ti, &(l, _, n)) in triples.iter().enumerate() {
            let e = eta.get(l, triples[ti].1, n);
            let scale = 1.0 / (sizes[l] * sizes[l] * s.clusters[l].epsilon);
            let mut v = e * e * s.phys.sigma2;
            let mut g = vec![0.0; vars.len()];
            for k in 0..kk {
                let Some(i) = idx(k, n) else { continue };
                let h2 = gain[ti][k];
                if f.cluster[k] == l {
                    let r = e * h2.sqrt() * u[i] - 1.0;
                    v += r * r;
                    g[i] += 2.0 * r * e * h2.sqrt() * scale;
                } else {
                    v += e * e * h2 * u[i] * u[i];
                    g[i] += 2.0 * e * e * h2 * u[i] * scale;
                }
            }
            out.push(v * scale);
            gs.push(g);
        }
        if let Some(dst) = grads {
            *dst = gs;
        }
        out
    };
    let project = |u: &mut Vec<f64>| {
        for k in 0..kk {
            let mut norm2 = 0.0;
            for n in 0..nn {
                if let Some(i) = idx(k, n) {
                    u[i] = u[i].max(0.0);
                    norm2 += u[i] * u[i];
                }
            }
            if norm2 > f.budget[k] {
                let c = (f.budget[k] / norm2).sqrt();
                for n in 0..nn {
                    if let Some(i) = idx(k, n) {
                        u[i] *= c;
                    }
                }
            }
        }
    };
    let smooth = |r: &[f64], mu: f64| {
        let top = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        top + mu * r.iter().map(|x| ((x - top) / mu).exp()).sum::<f64>().ln()
    };
    let mut u: Vec<f64> = vars.iter().map(|&(k, n)| start.get(k, n).sqrt()).collect();
    project(&mut u);
    if triples.is_empty() {
        return 0.0;
    }
    let mut best_u = u.clone();
    let mut best = ratios(&u, None).into_iter().fold(0.0, f64::max);
    let mut mu = 1e-2;
    while mu > 1e-9 {
        let mut step = 1e-2;
        let mut y = u.clone();
        let mut t_acc = 1.0f64;
        for _ in 0..4000 {
            let mut gs = Vec::new();
            let r = ratios(&y, Some(&mut gs));
            let fy = smooth(&r, mu);
            let top = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = r.iter().map(|x| ((x - top) / mu).exp()).collect();
            let wsum: f64 = w.iter().sum();
            let mut grad = vec![0.0; vars.len()];
            for (wi, g) in w.iter().zip(&gs) {
                for (gi, gv) in grad.iter_mut().zip(g) {
                    *gi += wi / wsum * gv;
                }
            }
            // Backtracking on the smoothed objective.
            let next = loop {
                let mut cand: Vec<f64> = y.iter().zip(&grad).map(|(a, b)| a - step * b).collect();
                project(&mut cand);
                let diff2: f64 = cand.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
                let lin: f64 = cand.iter().zip(&y).zip(&grad).map(|((c, yv), g)| (c - yv) * g).sum();
                let fc = smooth(&ratios(&cand, None), mu);
                if fc <= fy + lin + diff2 / (2.0 * step) + 1e-15 || step < 1e-14 {
                    break cand;
                }
                step *= 0.5;
            };
            let t_next = (1.0 + (1.0 + 4.0 * t_acc * t_acc).sqrt()) / 2.0;
            let moved: f64 = next.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            y = next.iter().zip(&u).map(|(a, b)| a + (t_acc - 1.0) / t_next * (a - b)).collect();
            project(&mut y);
            u = next;
            t_acc = t_next;
            step *= 1.5;
            let worst = ratios(&u, None).into_iter().fold(0.0, f64::max);
            if worst < best {
                best = worst;
                best_u = u.clone();
            }
            if moved < 1e-13 {
                break;
            }
        }
        u = best_u.clone();
        mu *= 0.1;
    }
    best
}
