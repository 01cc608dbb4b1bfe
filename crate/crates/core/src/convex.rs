//! Dense log-barrier interior-point solver for problems of the form
//!
//! ```text
//! minimize    cᵀx
//! subject to  g_i(x) ≤ 0,   i = 1..m
//! ```
//!
//! with smooth convex `g_i`. A phase-1 problem finds a strictly feasible
//! start when the caller does not supply one. Newton systems are solved with a
//! dense Cholesky factorization; the problems built by the power and
//! trajectory blocks stay in the low thousands of variables.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// A smooth convex inequality `g(x) ≤ 0`.
///
/// Implementations return `f64::INFINITY` from [`value`](Self::value) when
/// `x` lies outside the function's domain; the line search treats such points
/// as infeasible.
pub trait ConvexConstraint: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    /// Appends the non-zero partial derivatives as `(index, value)` pairs.
    fn gradient(&self, x: &[f64], out: &mut Vec<(usize, f64)>);
    /// Adds `scale · ∇²g(x)` to `hess`.
    fn add_hessian(&self, x: &[f64], scale: f64, hess: &mut DMatrix<f64>);
}

/// `½ zᵀPz + bᵀz + c` over the sub-vector `z = x[vars]`.
#[derive(Debug, Clone)]
pub struct QuadraticConstraint {
    pub vars: Vec<usize>,
    /// Row-major `vars.len() × vars.len()` symmetric matrix `P`.
    pub quad: Vec<f64>,
    pub linear: Vec<f64>,
    pub constant: f64,
}

impl QuadraticConstraint {
    pub fn linear(vars: Vec<usize>, linear: Vec<f64>, constant: f64) -> Self {
        let n = vars.len();
        QuadraticConstraint {
            vars,
            quad: vec![0.0; n * n],
            linear,
            constant,
        }
    }

    fn local(&self, x: &[f64]) -> Vec<f64> {
        self.vars.iter().map(|&i| x[i]).collect()
    }

    fn is_linear(&self) -> bool {
        self.quad.iter().all(|&v| v == 0.0)
    }
}

impl ConvexConstraint for QuadraticConstraint {
    fn value(&self, x: &[f64]) -> f64 {
        let z = self.local(x);
        let n = z.len();
        let mut v = self.constant;
        for i in 0..n {
            v += self.linear[i] * z[i];
            let row = &self.quad[i * n..(i + 1) * n];
            let pz: f64 = row.iter().zip(&z).map(|(a, b)| a * b).sum();
            v += 0.5 * z[i] * pz;
        }
        v
    }

    fn gradient(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        let z = self.local(x);
        let n = z.len();
        for i in 0..n {
            let row = &self.quad[i * n..(i + 1) * n];
            let pz: f64 = row.iter().zip(&z).map(|(a, b)| a * b).sum();
            out.push((self.vars[i], pz + self.linear[i]));
        }
    }

    fn add_hessian(&self, _x: &[f64], scale: f64, hess: &mut DMatrix<f64>) {
        if self.is_linear() {
            return;
        }
        let n = self.vars.len();
        for i in 0..n {
            for j in 0..n {
                let v = self.quad[i * n + j];
                if v != 0.0 {
                    hess[(self.vars[i], self.vars[j])] += scale * v;
                }
            }
        }
    }
}

pub struct ConvexProgram {
    pub dim: usize,
    /// Linear objective coefficients.
    pub objective: Vec<f64>,
    pub constraints: Vec<Box<dyn ConvexConstraint>>,
}

impl ConvexProgram {
    pub fn new(dim: usize, objective: Vec<f64>) -> Self {
        assert_eq!(objective.len(), dim);
        ConvexProgram {
            dim,
            objective,
            constraints: Vec::new(),
        }
    }

    pub fn push(&mut self, c: impl ConvexConstraint + 'static) {
        self.constraints.push(Box::new(c));
    }

    /// `lo ≤ x_i` and `x_i ≤ hi` as linear constraints.
    pub fn add_bounds(&mut self, i: usize, lo: Option<f64>, hi: Option<f64>) {
        if let Some(lo) = lo {
            self.push(QuadraticConstraint::linear(vec![i], vec![-1.0], lo));
        }
        if let Some(hi) = hi {
            self.push(QuadraticConstraint::linear(vec![i], vec![1.0], -hi));
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        dot(&self.objective, x)
    }

    /// Largest constraint value at `x` (negative when strictly feasible).
    pub fn max_constraint(&self, x: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.value(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub t0: f64,
    pub mu: f64,
    /// Stop centering once `λ²/2` falls below this.
    pub newton_tol: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Stop once the duality-gap bound `m/t` falls below this.
    pub gap_tol: f64,
    pub feas_tol: f64,
    pub max_outer: usize,
    pub max_newton: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            t0: 1.0,
            mu: 10.0,
            newton_tol: 1e-10,
            alpha: 0.25,
            beta: 0.5,
            gap_tol: 1e-8,
            feas_tol: 1e-9,
            max_outer: 60,
            max_newton: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub objective: f64,
    pub max_violation: f64,
    /// Barrier (outer) iterations.
    pub outer_iterations: usize,
    pub newton_iterations: usize,
    pub status: SolveStatus,
    /// Objective after each centering step.
    pub objective_trace: Vec<f64>,
    /// `‖c + Σ λ_i ∇g_i‖∞` with the barrier multipliers `λ_i = −1/(t g_i)`.
    pub kkt_residual: f64,
    /// Optimal phase-1 value when phase 1 reported infeasibility.
    pub infeasibility: Option<f64>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ConvexError {
    #[error("start point has dimension {got}, program has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("start point lies outside the domain of constraint {0}")]
    OutsideDomain(usize),
    #[error("Newton system could not be factorized")]
    Singular,
}

#[derive(Debug, Clone)]
pub enum Phase1Outcome {
    /// A point with every `g_i < 0`.
    Feasible(Vec<f64>),
    /// Minimized maximum violation (≥ 0): no strictly feasible point exists.
    Infeasible(f64),
    IterationLimit(f64),
}

/// Finds a strictly feasible point by minimizing `s` subject to `g_i(x) ≤ s`.
pub fn phase1(
    program: &ConvexProgram,
    start: &[f64],
    opts: &SolveOptions,
) -> Result<Phase1Outcome, ConvexError> {
    check_dim(program, start)?;
    let n = program.dim;
    let mut values = Vec::with_capacity(program.constraints.len());
    for (i, c) in program.constraints.iter().enumerate() {
        let v = c.value(start);
        if !v.is_finite() {
            return Err(ConvexError::OutsideDomain(i));
        }
        values.push(v);
    }
    let worst = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if worst < 0.0 || program.constraints.is_empty() {
        return Ok(Phase1Outcome::Feasible(start.to_vec()));
    }

    let shifted: Vec<Shifted<'_>> = program
        .constraints
        .iter()
        .map(|c| Shifted {
            inner: c.as_ref(),
            slack: n,
        })
        .collect();
    let refs: Vec<&dyn ConvexConstraint> = shifted.iter().map(|c| c as &dyn ConvexConstraint).collect();
    let mut objective = vec![0.0; n + 1];
    objective[n] = 1.0;
    let mut x = start.to_vec();
    x.push(worst + 1.0_f64.max(0.1 * worst.abs()));

    let stop = |x: &[f64]| x[n] < 0.0;
    let mut t = opts.t0;
    let m = refs.len() as f64;
    for _ in 0..opts.max_outer {
        let (_, done) = centering(&objective, &refs, t, &mut x, opts, Some(&stop))?;
        if done {
            x.truncate(n);
            return Ok(Phase1Outcome::Feasible(x));
        }
        if m / t < opts.gap_tol {
            let s = x[n];
            return Ok(if s < 0.0 {
                x.truncate(n);
                Phase1Outcome::Feasible(x)
            } else {
                Phase1Outcome::Infeasible(s)
            });
        }
        t *= opts.mu;
    }
    Ok(Phase1Outcome::IterationLimit(x[n]))
}

/// Solves the program from `start`, running phase 1 first when `start` is not
/// strictly feasible.
pub fn solve(
    program: &ConvexProgram,
    start: &[f64],
    opts: &SolveOptions,
) -> Result<SolveReport, ConvexError> {
    check_dim(program, start)?;
    let mut x = match phase1(program, start, opts)? {
        Phase1Outcome::Feasible(x) => x,
        Phase1Outcome::Infeasible(s) | Phase1Outcome::IterationLimit(s) => {
            let status = if s >= 0.0 {
                SolveStatus::Infeasible
            } else {
                SolveStatus::IterationLimit
            };
            return Ok(SolveReport {
                objective: program.objective_value(start),
                max_violation: program.max_constraint(start).max(0.0),
                x: start.to_vec(),
                outer_iterations: 0,
                newton_iterations: 0,
                status,
                objective_trace: Vec::new(),
                kkt_residual: f64::NAN,
                infeasibility: Some(s),
            });
        }
    };

    let refs: Vec<&dyn ConvexConstraint> = program.constraints.iter().map(|c| c.as_ref()).collect();
    let m = refs.len();
    let mut t = opts.t0;
    let mut trace = Vec::new();
    let mut newton_total = 0;
    let mut status = SolveStatus::IterationLimit;
    let mut outer = 0;
    while outer < opts.max_outer {
        outer += 1;
        let (iters, _) = centering(&program.objective, &refs, t, &mut x, opts, None)?;
        newton_total += iters;
        trace.push(program.objective_value(&x));
        if m == 0 || (m as f64) / t < opts.gap_tol {
            status = SolveStatus::Optimal;
            break;
        }
        t *= opts.mu;
    }

    let max_violation = program.max_constraint(&x).max(0.0);
    if status == SolveStatus::Optimal && max_violation > opts.feas_tol {
        status = SolveStatus::Infeasible;
    }
    let kkt_residual = kkt_residual(&program.objective, &refs, t, &x);
    Ok(SolveReport {
        objective: program.objective_value(&x),
        max_violation,
        x,
        outer_iterations: outer,
        newton_iterations: newton_total,
        status,
        objective_trace: trace,
        kkt_residual,
        infeasibility: None,
    })
}

fn check_dim(program: &ConvexProgram, start: &[f64]) -> Result<(), ConvexError> {
    if start.len() != program.dim {
        return Err(ConvexError::DimensionMismatch {
            expected: program.dim,
            got: start.len(),
        });
    }
    Ok(())
}

/// `g(x) − x[slack]`, used by phase 1.
struct Shifted<'a> {
    inner: &'a dyn ConvexConstraint,
    slack: usize,
}

impl ConvexConstraint for Shifted<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.inner.value(x) - x[self.slack]
    }
    fn gradient(&self, x: &[f64], out: &mut Vec<(usize, f64)>) {
        self.inner.gradient(x, out);
        out.push((self.slack, -1.0));
    }
    fn add_hessian(&self, x: &[f64], scale: f64, hess: &mut DMatrix<f64>) {
        self.inner.add_hessian(x, scale, hess);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

type StopRule<'a> = &'a dyn Fn(&[f64]) -> bool;

/// Minimizes `t·cᵀx − Σ log(−g_i(x))` by damped Newton from a strictly
/// feasible `x`. Returns the Newton step count and whether `stop` fired.
fn centering(
    c: &[f64],
    constraints: &[&dyn ConvexConstraint],
    t: f64,
    x: &mut [f64],
    opts: &SolveOptions,
    stop: Option<StopRule<'_>>,
) -> Result<(usize, bool), ConvexError> {
    let n = x.len();
    let mut hess = DMatrix::<f64>::zeros(n, n);
    let mut grad = vec![0.0; n];
    let mut sparse = Vec::new();
    let mut values: Vec<f64> = constraints.iter().map(|g| g.value(x)).collect();
    let mut trial = vec![0.0; n];
    let mut trial_values = vec![0.0; constraints.len()];

    for iter in 0..opts.max_newton {
        if let Some(stop) = stop {
            if stop(x) {
                return Ok((iter, true));
            }
        }
        hess.fill(0.0);
        for (g, c) in grad.iter_mut().zip(c) {
            *g = t * c;
        }
        for (con, &v) in constraints.iter().zip(&values) {
            let inv = -1.0 / v;
            sparse.clear();
            con.gradient(x, &mut sparse);
            for &(i, gi) in &sparse {
                grad[i] += inv * gi;
            }
            let w = inv * inv;
            for &(i, gi) in &sparse {
                for &(j, gj) in &sparse {
                    hess[(i, j)] += w * gi * gj;
                }
            }
            con.add_hessian(x, inv, &mut hess);
        }

        let step = newton_step(&hess, &grad)?;
        let slope = dot(&grad, &step);
        let decrement = -slope;
        if !(decrement > 0.0) || decrement / 2.0 <= opts.newton_tol {
            return Ok((iter, false));
        }

        // Backtrack into the domain, then to sufficient decrease. The
        // decrease is computed as a difference so it stays accurate at
        // large t.
        let mut s = 1.0;
        let mut accepted = false;
        while s > 1e-20 {
            for i in 0..n {
                trial[i] = x[i] + s * step[i];
            }
            let mut inside = true;
            for (tv, con) in trial_values.iter_mut().zip(constraints) {
                *tv = con.value(&trial);
                if !(*tv < 0.0) {
                    inside = false;
                    break;
                }
            }
            if inside {
                let mut change = t * s * dot(c, &step);
                for (&new, &old) in trial_values.iter().zip(&values) {
                    change -= (new / old).ln();
                }
                // Near the centre the decrease drowns in rounding; a full
                // Newton step is then taken on the quadratic-convergence
                // guarantee alone.
                if change <= opts.alpha * s * slope || (s == 1.0 && decrement < 1e-6) {
                    accepted = true;
                    break;
                }
            }
            s *= opts.beta;
        }
        if !accepted {
            return Ok((iter, false));
        }
        x.copy_from_slice(&trial);
        values.copy_from_slice(&trial_values);
    }
    Ok((opts.max_newton, false))
}

fn newton_step(hess: &DMatrix<f64>, grad: &[f64]) -> Result<Vec<f64>, ConvexError> {
    let n = grad.len();
    let rhs = DVector::from_iterator(n, grad.iter().map(|g| -g));
    if let Some(chol) = hess.clone().cholesky() {
        let sol = chol.solve(&rhs);
        if sol.iter().all(|v| v.is_finite()) {
            return Ok(sol.iter().cloned().collect());
        }
    }
    let scale = (0..n).map(|i| hess[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut ridge = 1e-12 * scale;
    for _ in 0..20 {
        let mut h = hess.clone();
        for i in 0..n {
            h[(i, i)] += ridge;
        }
        if let Some(chol) = h.cholesky() {
            let sol = chol.solve(&rhs);
            if sol.iter().all(|v| v.is_finite()) {
                return Ok(sol.iter().cloned().collect());
            }
        }
        ridge *= 100.0;
    }
    Err(ConvexError::Singular)
}

fn kkt_residual(c: &[f64], constraints: &[&dyn ConvexConstraint], t: f64, x: &[f64]) -> f64 {
    let mut r = c.to_vec();
    let mut sparse = Vec::new();
    for con in constraints {
        let v = con.value(x);
        let lambda = -1.0 / (t * v);
        sparse.clear();
        con.gradient(x, &mut sparse);
        for &(i, g) in &sparse {
            r[i] += lambda * g;
        }
    }
    r.iter().fold(0.0, |a, v| a.max(v.abs()))
}
