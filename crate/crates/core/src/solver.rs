//! Constrained minimization of `J` on `{K = 1}`, multiplier extraction and
//! rescaling to a positive solution.
//!
//! The iteration is a projected gradient method on the constraint manifold:
//! the `μ`-gradient of `J` is projected orthogonally to the gradient of `K`,
//! the trial point is clamped to `u >= 0` and pulled back onto `{K = 1}` with
//! the closed-form rescaling `u ↦ K(u)^{-1/α} u`. Step sizes come from a
//! Barzilai–Borwein estimate followed by Armijo backtracking, so `J` never
//! increases along accepted iterates.
//!
//! The gradient stage stops at the stationarity target or when `J` stalls at
//! rounding level. A damped Newton iteration on the Euler–Lagrange system
//! `(r(u, λ), K(u) - 1) = 0` then resolves every vertex equation to relative
//! accuracy, including vertices where `u` is many orders of magnitude below
//! its maximum. Newton iterates are accepted only if they lower the
//! componentwise relative defect and do not raise `J` by more than
//! [`ENERGY_ROUNDING`]; the Armijo stage is strictly monotone.

use log::{debug, info};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::functionals::{
    constraint_gradient_raw, constraint_raw, energy_gradient_raw, energy_raw, ProblemSpec,
};
use crate::operators::signed_pow;
use crate::graph::{graph_distance, weighted_sum, VertexFunction, WeightedGraph};
use crate::verify::{
    hypotheses_check, positivity_certificate, residual_report_with_factor, PositivityCertificate,
    ResidualReport,
};

/// Allowed drift of `K(ū)` from 1.
pub const CONSTRAINT_TOL: f64 = 1e-10;
/// Relative agreement required between the multiplier formulas.
pub const MULTIPLIER_TOL: f64 = 1e-8;
/// Below this step the iteration is declared stagnant.
pub const STEP_FLOOR: f64 = 1e-12;
const STEP_CEIL: f64 = 1e12;
/// Iterations without a relative decrease of `J` above rounding before the
/// gradient stage hands over to Newton.
const STALL_WINDOW: usize = 200;
/// Largest vertex count for the dense Newton stage.
pub const NEWTON_MAX_VERTICES: usize = 1500;
const NEWTON_MAX_STEPS: usize = 40;
/// Relative rounding bound on evaluations of `J`. Near a minimizer, changes
/// of `J` fall below it and the sign of a computed decrease is noise, so the
/// finishing stages accept iterates whose `J` exceeds the previous one by at
/// most this much.
pub const ENERGY_ROUNDING: f64 = 16.0 * f64::EPSILON;
const GAUSS_SEIDEL_MAX_SWEEPS: usize = 20_000;
/// Largest relative change of a sweep at which Gauss–Seidel hands over to Newton.
const GAUSS_SEIDEL_TOL: f64 = 1e-8;
/// The Newton stage stops once every vertex equation holds to this relative
/// accuracy.
const NEWTON_RELATIVE_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// `exp(-d(x, x0)^2 / (2 w^2))` with `w = bump_width`.
    Bump,
    Uniform,
    Custom(VertexFunction),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    pub max_iters: usize,
    /// Target for the stationarity measure (see [`Minimization::stationarity`]).
    pub grad_tol: f64,
    /// First trial step; `None` derives it from a Lipschitz estimate of `∇J`.
    pub step_init: Option<f64>,
    pub backtrack: f64,
    pub armijo: f64,
    pub seed: u64,
    pub init: Init,
    /// Centre of the bump initialisation.
    pub x0: usize,
    pub bump_width: f64,
    /// Keep every accepted iterate in the trace.
    pub record_iterates: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_iters: 50_000,
            grad_tol: 1e-9,
            step_init: None,
            backtrack: 0.5,
            armijo: 1e-4,
            seed: 0,
            init: Init::Bump,
            x0: 0,
            bump_width: 2.0,
            record_iterates: false,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::Argument(format!("grad_tol must be positive (got {})", self.grad_tol)));
        }
        if let Some(s) = self.step_init {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::Argument(format!("step_init must be positive (got {s})")));
            }
        }
        for (name, v) in [("backtrack", self.backtrack), ("armijo", self.armijo)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Argument(format!("{name} must lie in (0, 1) (got {v})")));
            }
        }
        if !(self.bump_width > 0.0) {
            return Err(Error::Argument(format!("bump_width must be positive (got {})", self.bump_width)));
        }
        Ok(())
    }
}

/// Which part of the iteration produced a trace record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Projected gradient with Armijo backtracking; `J` strictly nonincreasing.
    Descent,
    GaussSeidel,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IterRecord {
    pub iter: usize,
    pub stage: Stage,
    pub energy: f64,
    pub constraint: f64,
    pub stationarity: f64,
    /// Accepted step length (Newton damping factor); NaN for Gauss–Seidel.
    pub step: f64,
    /// `max_x |u(x)| / (J(u) / inf hμ)^{1/p}`; at most 1 on every iterate.
    pub sup_bound_ratio: f64,
}

#[derive(Debug, Clone)]
pub struct Minimization {
    pub u_bar: VertexFunction,
    pub gamma: f64,
    /// `max(sup|r| / (1 + γ), sup|r_target|)` where `r` is the Euler–Lagrange
    /// defect and `r_target` the predicted defect of the rescaled equation.
    pub stationarity: f64,
    pub iters: usize,
    pub converged: bool,
    pub trace: Vec<IterRecord>,
    /// Accepted iterates, starting with the normalised initial guess.
    pub iterates: Vec<VertexFunction>,
}

fn inner(graph: &WeightedGraph, a: &[f64], b: &[f64]) -> f64 {
    let prod: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    weighted_sum(graph, &prod)
}

/// `K(v)^{-1/α} v`, or `None` when `K(v) = 0`.
fn normalize(graph: &WeightedGraph, spec: &ProblemSpec, v: &mut [f64]) -> Option<f64> {
    let k = constraint_raw(graph, spec, v);
    if !(k > 0.0 && k.is_finite()) {
        return None;
    }
    let c = k.powf(-1.0 / spec.alpha);
    v.iter_mut().for_each(|x| *x *= c);
    Some(k)
}

fn initial_guess(graph: &WeightedGraph, opts: &SolveOptions) -> Result<Vec<f64>> {
    match &opts.init {
        Init::Uniform => Ok(vec![1.0; graph.n()]),
        Init::Bump => {
            let dist = graph_distance(graph, opts.x0)?;
            let w2 = 2.0 * opts.bump_width * opts.bump_width;
            Ok(dist
                .iter()
                .map(|&d| (-((d * d) as f64) / w2).exp())
                .collect())
        }
        Init::Custom(u) => {
            graph.check_len(u)?;
            Ok(u.iter().map(|v| v.max(0.0)).collect())
        }
    }
}

/// Gershgorin bound on the `μ`-Hessian of `J` at `u`.
fn lipschitz_estimate(graph: &WeightedGraph, spec: &ProblemSpec, u: &[f64]) -> f64 {
    let p = spec.p;
    let m = graph.measure();
    (0..graph.n())
        .map(|x| {
            let edges: f64 = graph
                .neighbors(x)
                .iter()
                .map(|&(y, w)| 2.0 * w * (u[y] - u[x]).abs().powf(p - 2.0))
                .sum();
            p * (p - 1.0) * (edges / m[x] + spec.h[x] * u[x].abs().powf(p - 2.0))
        })
        .fold(0.0, f64::max)
}

struct Point {
    u: Vec<f64>,
    energy: f64,
    /// gradient projected orthogonally to `K'`
    dir: Vec<f64>,
    slope: f64,
    stationarity: f64,
    /// `max_x |r(x)| / scale(x)`, see [`term_scale`].
    relative_defect: f64,
}

/// Sum of the magnitudes of the terms of the Euler–Lagrange density at each
/// vertex. Dividing the defect by it gives a componentwise relative error
/// that stays meaningful where `u` is tiny.
fn term_scale(graph: &WeightedGraph, spec: &ProblemSpec, u: &[f64], kgrad: &[f64], lambda: f64) -> Vec<f64> {
    let p = spec.p;
    let m = graph.measure();
    (0..graph.n())
        .map(|x| {
            let edges: f64 = graph
                .neighbors(x)
                .iter()
                .map(|&(y, w)| w * (u[y] - u[x]).abs().powf(p - 1.0))
                .sum();
            p * edges / m[x] + p * spec.h[x] * u[x].abs().powf(p - 1.0) + (lambda * kgrad[x]).abs()
        })
        .collect()
}

fn relative_defect(residual: &[f64], scale: &[f64]) -> f64 {
    residual
        .iter()
        .zip(scale)
        .filter(|(_, &s)| s > 0.0)
        .fold(0.0, |m: f64, (r, s)| m.max(r.abs() / s))
}

/// Multiplier from pairing the Euler–Lagrange equation with `u`.
fn pairing_lambda(graph: &WeightedGraph, spec: &ProblemSpec, u: &[f64], grad: &[f64]) -> f64 {
    let g_alpha: Vec<f64> = u
        .iter()
        .zip(spec.g.iter())
        .map(|(v, g)| g * v.max(0.0).powf(spec.alpha))
        .collect();
    inner(graph, grad, u) / (spec.alpha * spec.theta * weighted_sum(graph, &g_alpha))
}

fn evaluate(graph: &WeightedGraph, spec: &ProblemSpec, u: Vec<f64>) -> Point {
    let (p, alpha, theta) = (spec.p, spec.alpha, spec.theta);
    let energy = energy_raw(graph, spec, &u);
    let grad = energy_gradient_raw(graph, spec, &u);
    let kgrad = constraint_gradient_raw(spec, &u);
    let lambda = pairing_lambda(graph, spec, &u, &grad);
    let residual: Vec<f64> = grad.iter().zip(&kgrad).map(|(w, k)| w - lambda * k).collect();
    let defect = residual.iter().fold(0.0, |m: f64, r| m.max(r.abs()));
    let relative_defect = relative_defect(&residual, &term_scale(graph, spec, &u, &kgrad, lambda));
    let target_scale = if p > alpha {
        (p / (alpha * lambda * theta)).powf((p - 1.0) / (p - alpha)) / p
    } else {
        1.0 / p
    };
    let stationarity = (defect / (1.0 + energy.abs())).max(defect * target_scale);
    let kk = inner(graph, &kgrad, &kgrad);
    let lambda_ls = if kk > 0.0 {
        inner(graph, &kgrad, &grad) / kk
    } else {
        0.0
    };
    let dir: Vec<f64> = grad.iter().zip(&kgrad).map(|(w, k)| w - lambda_ls * k).collect();
    let slope = inner(graph, &grad, &dir);
    Point {
        u,
        energy,
        dir,
        slope,
        stationarity,
        relative_defect,
    }
}

fn sup_bound_ratio(u: &[f64], energy: f64, h_mu_min: f64, p: f64) -> f64 {
    let bound = (energy / h_mu_min).powf(1.0 / p);
    let largest = u.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    if largest == 0.0 {
        0.0
    } else {
        largest / bound
    }
}

/// Minimizes `J` over `{u >= 0, K(u) = 1}`.
pub fn minimize_constrained(
    graph: &WeightedGraph,
    spec: &ProblemSpec,
    opts: &SolveOptions,
) -> Result<Minimization> {
    opts.validate()?;
    spec.check_sizes(graph)?;
    crate::operators::check_p(spec.p)?;
    if spec.g.iter().all(|&g| g <= 0.0) {
        return Err(Error::InfeasibleConstraint);
    }
    let mut u0 = initial_guess(graph, opts)?;
    if normalize(graph, spec, &mut u0).is_none() {
        return Err(Error::Argument(
            "initial guess has K(u) = 0; it must be positive where g > 0".into(),
        ));
    }
    let h_mu_min = spec.h_mu_min(graph);
    let p = spec.p;

    let mut step = opts
        .step_init
        .unwrap_or_else(|| 1.0 / (1.0 + lipschitz_estimate(graph, spec, &u0)));
    let mut point = evaluate(graph, spec, u0);
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let record = |point: &Point, iter: usize, stage: Stage, step: f64, trace: &mut Vec<IterRecord>| {
        trace.push(IterRecord {
            iter,
            stage,
            energy: point.energy,
            constraint: constraint_raw(graph, spec, &point.u),
            stationarity: point.stationarity,
            step,
            sup_bound_ratio: sup_bound_ratio(&point.u, point.energy, h_mu_min, p),
        });
    };
    record(&point, 0, Stage::Descent, step, &mut trace);
    if opts.record_iterates {
        iterates.push(VertexFunction::from_raw(point.u.clone()));
    }

    let mut converged = point.stationarity <= opts.grad_tol;
    let mut iters = 0;
    let mut best_energy = point.energy;
    let mut last_progress = 0;
    while !converged && iters < opts.max_iters {
        if iters - last_progress > STALL_WINDOW {
            debug!("J stalled at iteration {iters}");
            break;
        }
        let mut s = step;
        let accepted = loop {
            if s < STEP_FLOOR {
                break None;
            }
            let mut trial: Vec<f64> = point
                .u
                .iter()
                .zip(&point.dir)
                .map(|(u, d)| (u - s * d).max(0.0))
                .collect();
            if normalize(graph, spec, &mut trial).is_some() {
                let energy = energy_raw(graph, spec, &trial);
                let predicted = s * point.slope;
                let armijo = energy <= point.energy - opts.armijo * predicted;
                // decrease predicted below rounding of J: accept any non-increase
                let flat = predicted <= 64.0 * f64::EPSILON * point.energy.abs()
                    && energy <= point.energy;
                if armijo || flat {
                    break Some((trial, s));
                }
            }
            s *= opts.backtrack;
        };
        let Some((trial, s)) = accepted else {
            debug!("step fell below {STEP_FLOOR:e} at iteration {iters}");
            break;
        };
        iters += 1;
        let next = evaluate(graph, spec, trial);
        // Barzilai–Borwein step for the next iteration
        let du: Vec<f64> = next.u.iter().zip(&point.u).map(|(a, b)| a - b).collect();
        let dd: Vec<f64> = next.dir.iter().zip(&point.dir).map(|(a, b)| a - b).collect();
        let (ss, sy) = (inner(graph, &du, &du), inner(graph, &du, &dd));
        step = if sy > 0.0 && ss > 0.0 {
            (ss / sy).clamp(STEP_FLOOR, STEP_CEIL)
        } else {
            (2.0 * s).min(STEP_CEIL)
        };
        debug_assert!(next.energy <= point.energy);
        point = next;
        record(&point, iters, Stage::Descent, s, &mut trace);
        if opts.record_iterates {
            iterates.push(VertexFunction::from_raw(point.u.clone()));
        }
        converged = point.stationarity <= opts.grad_tol;
        if point.energy < best_energy - 16.0 * f64::EPSILON * best_energy.abs() {
            best_energy = point.energy;
            last_progress = iters;
        }
    }
    if spec.p > spec.alpha && iters < opts.max_iters {
        if let Some(next) = gauss_seidel_stage(graph, spec, &point) {
            iters += 1;
            point = next;
            record(&point, iters, Stage::GaussSeidel, f64::NAN, &mut trace);
            if opts.record_iterates {
                iterates.push(VertexFunction::from_raw(point.u.clone()));
            }
            converged = point.stationarity <= opts.grad_tol;
        }
    }
    if graph.n() <= NEWTON_MAX_VERTICES {
        for _ in 0..NEWTON_MAX_STEPS {
            if iters >= opts.max_iters {
                break;
            }
            let Some((next, t)) = newton_step(graph, spec, &point) else {
                break;
            };
            iters += 1;
            point = next;
            record(&point, iters, Stage::Newton, t, &mut trace);
            if opts.record_iterates {
                iterates.push(VertexFunction::from_raw(point.u.clone()));
            }
            converged = point.stationarity <= opts.grad_tol;
            if point.relative_defect <= NEWTON_RELATIVE_TOL {
                break;
            }
        }
    }
    info!(
        "minimization finished: iters = {iters}, J = {:e}, stationarity = {:e}, converged = {converged}",
        point.energy, point.stationarity
    );
    Ok(Minimization {
        gamma: point.energy,
        stationarity: point.stationarity,
        u_bar: VertexFunction::from_raw(point.u),
        iters,
        converged,
        trace,
        iterates,
    })
}

/// Unique positive root `b` of the vertex equation of
/// `-Δ_p u + h u^{p-1} = g u^{α-1}` at `x` with the neighbours held fixed,
/// or 0 when `g(x) = 0`. For `p > α` the map `b ↦ F(b) / b^{α-1}` is strictly
/// increasing on `b > 0`, so bisection on the sign of `F` finds the root.
fn vertex_root(graph: &WeightedGraph, spec: &ProblemSpec, u: &[f64], x: usize) -> f64 {
    let (p, alpha) = (spec.p, spec.alpha);
    let (h, g, m) = (spec.h[x], spec.g[x], graph.measure()[x]);
    if g <= 0.0 {
        return 0.0;
    }
    let f = |b: f64| {
        let edges: f64 = graph
            .neighbors(x)
            .iter()
            .map(|&(y, w)| w * signed_pow(b - u[y], p - 1.0))
            .sum();
        edges / m + h * b.powf(p - 1.0) - g * b.powf(alpha - 1.0)
    };
    let neighbour_max = graph.neighbors(x).iter().fold(0.0, |a: f64, &(y, _)| a.max(u[y]));
    let mut hi = neighbour_max.max((g / h).powf(1.0 / (p - alpha)));
    let mut lo = 0.0;
    while lo < hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// `p > α`: nonlinear Gauss–Seidel on the rescaled equation, started from
/// `c ū`. Each sweep solves every vertex equation exactly, which resolves
/// vertices where `u` is too small to move `J` above rounding. Returns the
/// normalised result if it lowers the relative defect without raising `J`
/// beyond rounding.
fn gauss_seidel_stage(graph: &WeightedGraph, spec: &ProblemSpec, point: &Point) -> Option<Point> {
    let (p, alpha, theta) = (spec.p, spec.alpha, spec.theta);
    let grad = energy_gradient_raw(graph, spec, &point.u);
    let lambda = pairing_lambda(graph, spec, &point.u, &grad);
    if !(lambda > 0.0) {
        return None;
    }
    let c = (p / (alpha * lambda * theta)).powf(1.0 / (p - alpha));
    let mut u: Vec<f64> = point.u.iter().map(|v| c * v).collect();
    for _ in 0..GAUSS_SEIDEL_MAX_SWEEPS {
        let mut change: f64 = 0.0;
        for x in 0..graph.n() {
            let next = vertex_root(graph, spec, &u, x);
            let scale = next.abs().max(u[x].abs());
            if scale > 0.0 {
                change = change.max((next - u[x]).abs() / scale);
            }
            u[x] = next;
        }
        if change <= GAUSS_SEIDEL_TOL {
            break;
        }
    }
    normalize(graph, spec, &mut u)?;
    let next = evaluate(graph, spec, u);
    (next.relative_defect < point.relative_defect && not_above(next.energy, point.energy)).then_some(next)
}

/// `a <= b` up to [`ENERGY_ROUNDING`] relative to `b`.
fn not_above(a: f64, b: f64) -> bool {
    a <= b + ENERGY_ROUNDING * b.abs()
}

/// One damped Newton step on `F(u, λ) = (J'(u) - λK'(u), K(u) - 1)`, where
/// `J'` and `K'` are the `μ`-gradient densities. Rows are scaled by
/// [`term_scale`] before factorization. Returns `None` when no damped step
/// lowers the componentwise relative defect without raising `J` beyond
/// rounding.
fn newton_step(graph: &WeightedGraph, spec: &ProblemSpec, point: &Point) -> Option<(Point, f64)> {
    let (p, alpha, theta) = (spec.p, spec.alpha, spec.theta);
    let n = graph.n();
    let u = &point.u;
    let m = graph.measure();
    let grad = energy_gradient_raw(graph, spec, u);
    let kgrad = constraint_gradient_raw(spec, u);
    let lambda = pairing_lambda(graph, spec, u, &grad);
    let scale = term_scale(graph, spec, u, &kgrad, lambda);

    let mut jac = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut rhs = DVector::<f64>::zeros(n + 1);
    for x in 0..n {
        let row = if scale[x] > 0.0 { 1.0 / scale[x] } else { 1.0 };
        rhs[x] = row * (grad[x] - lambda * kgrad[x]);
        let mut diag = 0.0;
        for &(y, w) in graph.neighbors(x) {
            if y == x {
                continue;
            }
            let c = p * (p - 1.0) * w * (u[y] - u[x]).abs().powf(p - 2.0) / m[x];
            jac[(x, y)] -= row * c;
            diag += c;
        }
        let ux = u[x].max(0.0);
        diag += p * (p - 1.0) * spec.h[x] * ux.powf(p - 2.0);
        if ux > 0.0 {
            diag -= lambda * alpha * (alpha - 1.0) * theta * spec.g[x] * ux.powf(alpha - 2.0);
        }
        jac[(x, x)] += row * diag;
        jac[(x, n)] = -row * kgrad[x];
        jac[(n, x)] = m[x] * kgrad[x];
    }
    rhs[n] = constraint_raw(graph, spec, u) - 1.0;
    let delta = jac.lu().solve(&rhs)?;

    let mut t = 1.0;
    for _ in 0..30 {
        let mut trial: Vec<f64> = (0..n).map(|x| (u[x] - t * delta[x]).max(0.0)).collect();
        if normalize(graph, spec, &mut trial).is_some() {
            let next = evaluate(graph, spec, trial);
            if next.relative_defect < point.relative_defect && not_above(next.energy, point.energy) {
                return Some((next, t));
            }
        }
        t *= 0.5;
    }
    None
}

/// The multiplier `λ` of `-pΔ_pū + phū^{p-1} = λ α θ g ū^{α-1}` by three routes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Multiplier {
    /// `∫ J'(ū) ū dμ / (αθ ∫ g ū^α dμ)`, the equation paired with `ū`.
    pub pairing: f64,
    /// `p J(ū) / α`, using `K(ū) = 1`.
    pub simplified: f64,
    /// Least-squares fit of `λ` in the equation over vertices.
    pub least_squares: f64,
}

pub fn lagrange_multiplier(
    graph: &WeightedGraph,
    spec: &ProblemSpec,
    u_bar: &VertexFunction,
) -> Result<Multiplier> {
    spec.check_sizes(graph)?;
    graph.check_len(u_bar)?;
    let u = u_bar.as_slice();
    let k = constraint_raw(graph, spec, u);
    if (k - 1.0).abs() > MULTIPLIER_TOL {
        return Err(Error::Argument(format!("multiplier needs K(u) = 1 (got {k})")));
    }
    let g_alpha: Vec<f64> = u
        .iter()
        .zip(spec.g.iter())
        .map(|(v, g)| g * v.max(0.0).powf(spec.alpha))
        .collect();
    let g_int = weighted_sum(graph, &g_alpha);
    if !(g_int > 0.0) {
        return Err(Error::DegenerateConstraint(g_int));
    }
    let grad = energy_gradient_raw(graph, spec, u);
    let pairing = inner(graph, &grad, u) / (spec.alpha * spec.theta * g_int);
    let simplified = spec.p * energy_raw(graph, spec, u) / spec.alpha;
    let kgrad = constraint_gradient_raw(spec, u);
    let least_squares = inner(graph, &kgrad, &grad) / inner(graph, &kgrad, &kgrad);
    let scale = pairing.abs().max(simplified.abs());
    if (pairing - simplified).abs() > MULTIPLIER_TOL * scale {
        return Err(Error::Consistency(format!(
            "multiplier by pairing {pairing:e} disagrees with pJ/alpha = {simplified:e}"
        )));
    }
    Ok(Multiplier {
        pairing,
        simplified,
        least_squares,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rescaled {
    pub u: VertexFunction,
    /// Factor `c` with `u = c ū`.
    pub scale: f64,
    /// `Λ` in `-Δ_p u + h u^{p-1} = Λ g u^{α-1}`.
    pub eigen_factor: f64,
}

/// `p > α`: `u = (p/(αλθ))^{1/(p-α)} ū`, `Λ = 1`.
/// `p = α`: `u = ū`, `Λ = λαθ/p`.
pub fn rescale_solution(spec: &ProblemSpec, u_bar: &VertexFunction, lambda: f64) -> Result<Rescaled> {
    let (p, alpha, theta) = (spec.p, spec.alpha, spec.theta);
    if p < alpha {
        return Err(Error::Argument(format!("rescaling needs alpha <= p (alpha = {alpha}, p = {p})")));
    }
    if !(lambda > 0.0) {
        return Err(Error::Argument(format!("rescaling needs lambda > 0 (got {lambda})")));
    }
    if p > alpha {
        let scale = (p / (alpha * lambda * theta)).powf(1.0 / (p - alpha));
        Ok(Rescaled {
            u: u_bar.scaled(scale),
            scale,
            eigen_factor: 1.0,
        })
    } else {
        Ok(Rescaled {
            u: u_bar.clone(),
            scale: 1.0,
            eigen_factor: lambda * alpha * theta / p,
        })
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u_bar: VertexFunction,
    pub gamma: f64,
    pub lambda: f64,
    pub multiplier: Multiplier,
    pub theta_used: f64,
    pub u: VertexFunction,
    pub scale: f64,
    pub eigen_factor: f64,
    /// `p = α` only: whether `Λ = 1` to the multiplier tolerance, i.e. whether
    /// `θ = 1/λ` reproduces the unscaled equation.
    pub eigen_factor_is_one: bool,
    pub residual: ResidualReport,
    pub positivity: PositivityCertificate,
    pub stationarity: f64,
    pub iters: usize,
    pub converged: bool,
    /// Converged, strictly positive and residual within `10 grad_tol`.
    pub success: bool,
    pub constraint: f64,
    pub trace: Vec<IterRecord>,
    pub iterates: Vec<VertexFunction>,
}

/// Hypothesis check, minimization, multiplier, rescaling and residual report.
pub fn solve(graph: &WeightedGraph, spec: &ProblemSpec, opts: &SolveOptions) -> Result<SolveResult> {
    if spec.g.iter().all(|&g| g <= 0.0) && spec.check_sizes(graph).is_ok() {
        return Err(Error::InfeasibleConstraint);
    }
    hypotheses_check(graph, spec)?;
    let min = minimize_constrained(graph, spec, opts)?;
    let multiplier = lagrange_multiplier(graph, spec, &min.u_bar)?;
    let lambda = multiplier.pairing;
    let rescaled = rescale_solution(spec, &min.u_bar, lambda)?;
    let residual = residual_report_with_factor(graph, spec, &rescaled.u, rescaled.eigen_factor)?;
    let positivity = positivity_certificate(graph, spec.p, &rescaled.u)?;
    let constraint = constraint_raw(graph, spec, min.u_bar.as_slice());
    let eigen_factor_is_one = (rescaled.eigen_factor - 1.0).abs() <= MULTIPLIER_TOL;
    let success = min.converged
        && positivity.pass
        && residual.sup <= 10.0 * opts.grad_tol
        && (spec.p == spec.alpha || eigen_factor_is_one)
        && (constraint - 1.0).abs() <= CONSTRAINT_TOL;
    Ok(SolveResult {
        u_bar: min.u_bar,
        gamma: min.gamma,
        lambda,
        multiplier,
        theta_used: spec.theta,
        u: rescaled.u,
        scale: rescaled.scale,
        eigen_factor: rescaled.eigen_factor,
        eigen_factor_is_one,
        residual,
        positivity,
        stationarity: min.stationarity,
        iters: min.iters,
        converged: min.converged,
        success,
        constraint,
        trace: min.trace,
        iterates: min.iterates,
    })
}

/// Hop radius chosen for an exhaustion together with the induced bound on the
/// mass of `K` outside the ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncationChoice {
    pub radius: usize,
    /// `(∫_{dist > R} h^{-δ} dμ)^δ` at the chosen radius.
    pub tail: f64,
    pub k_tail_bound: f64,
}

/// `(∫_{dist(x,x0) > R} h^{-δ} dμ)^δ` for `R = 0..=ecc(x0)`.
pub fn tail_profile(graph: &WeightedGraph, spec: &ProblemSpec, x0: usize) -> Result<Vec<f64>> {
    spec.check_sizes(graph)?;
    let dist = graph_distance(graph, x0)?;
    let ecc = dist.iter().copied().max().unwrap_or(0);
    let mut shell = vec![0.0; ecc + 1];
    for (x, &d) in dist.iter().enumerate() {
        shell[d] += graph.measure()[x] * spec.h[x].powf(-spec.delta);
    }
    // tail[R] = sum of shells R+1..=ecc, accumulated outward-in
    let mut tail = vec![0.0; ecc + 1];
    for r in (0..ecc).rev() {
        tail[r] = tail[r + 1] + shell[r + 1];
    }
    Ok(tail.into_iter().map(|t| t.powf(spec.delta)).collect())
}

/// Bound on `∫_{dist > R} G(x, u) dμ` for any `u` with `J(u) <= γ + 1`, given
/// the tail value `ε = (∫_{dist > R} h^{-δ} dμ)^δ`.
///
/// `p > α`: `C ε^{(p-α)δ/α} (γ+1)^{α/p}`; `p = α`: `C ε^{(p-2)δ/(p-1)} (γ+1)^{1/(p-1)}`.
pub fn k_tail_bound(graph: &WeightedGraph, spec: &ProblemSpec, tail: f64, gamma_est: f64) -> f64 {
    let (p, a, d) = (spec.p, spec.alpha, spec.delta);
    let h_min = spec.h_min();
    let g_theta = spec.g_max().max(0.0) * spec.theta;
    if p > a {
        let c = g_theta * h_min.powf(-(a / (p - a) - d) * (p - a) / p);
        c * tail.powf((p - a) * d / a) * (gamma_est + 1.0).powf(a / p)
    } else {
        let sup = ((gamma_est + 1.0) / spec.h_mu_min(graph)).powf((p - 2.0) / (p - 1.0));
        let c = g_theta * sup * h_min.powf(-(1.0 / (p - 2.0) - d) * (p - 2.0) / (p - 1.0));
        c * tail.powf((p - 2.0) * d / (p - 1.0)) * (gamma_est + 1.0).powf(1.0 / (p - 1.0))
    }
}

/// Smallest `R` (at most `r_max`, default the eccentricity of `x0`) whose tail
/// `(∫_{dist > R} h^{-δ} dμ)^δ` is at most `epsilon`.
pub fn choose_truncation_radius(
    graph: &WeightedGraph,
    spec: &ProblemSpec,
    x0: usize,
    epsilon: f64,
    gamma_est: f64,
    r_max: Option<usize>,
) -> Result<TruncationChoice> {
    if !(epsilon > 0.0) {
        return Err(Error::Argument(format!("tail tolerance must be positive (got {epsilon})")));
    }
    let tails = tail_profile(graph, spec, x0)?;
    let last = r_max.unwrap_or(tails.len() - 1).min(tails.len() - 1);
    match tails[..=last].iter().position(|&t| t <= epsilon) {
        Some(radius) => Ok(TruncationChoice {
            radius,
            tail: tails[radius],
            k_tail_bound: k_tail_bound(graph, spec, tails[radius], gamma_est),
        }),
        None => Err(Error::TruncationUnattainable {
            radius: last,
            achieved: tails[last],
            epsilon,
        }),
    }
}
