//! Hypothesis checks, residual reports, positivity certificates, randomized
//! verification of the inequalities behind the existence argument, and
//! exhaustion studies.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, HypothesisViolation, Result};
use crate::functionals::{
    constraint_raw, energy_raw, kprime_lipschitz_probe, nonlinearity_g, ProblemSpec,
};
use crate::graph::{
    graph_distance, truncate_ball, weighted_sum, TruncationSpec, VertexFunction, WeightedGraph,
};
use crate::operators::{p_laplacian_raw, signed_pow};
use crate::solver::{k_tail_bound, minimize_constrained, solve, tail_profile, SolveOptions};

/// Relative slack granted to every checked inequality.
pub const INEQUALITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub p: f64,
    pub alpha: f64,
    pub delta: f64,
    /// `1/(p-2)`, infinite for `p = 2`.
    pub delta_upper: f64,
    pub theta: f64,
    pub h_min: f64,
    pub h_mu_min: f64,
    pub g_min: f64,
    pub g_max: f64,
    /// `(∫ h^{-δ} dμ)^δ` on the graph at hand.
    pub h_inverse_l_delta: f64,
    pub connected: bool,
    pub pass: bool,
}

/// Checks every hypothesis of the existence theorem on a (finite) graph and
/// fails on the first violation.
pub fn hypotheses_check(graph: &WeightedGraph, spec: &ProblemSpec) -> Result<HypothesisReport> {
    spec.check_sizes(graph)?;
    for (name, f) in [("h", &spec.h), ("g", &spec.g)] {
        if let Some(vertex) = f.iter().position(|v| !v.is_finite()) {
            return Err(HypothesisViolation::NonFiniteCoefficient { name, vertex }.into());
        }
    }
    let (p, alpha, delta, theta) = (spec.p, spec.alpha, spec.delta, spec.theta);
    if !(p >= 2.0 && p.is_finite()) {
        return Err(HypothesisViolation::PBelowTwo(p).into());
    }
    if !(alpha > 2.0) {
        return Err(HypothesisViolation::AlphaNotAboveTwo(alpha).into());
    }
    if !(alpha <= p) {
        return Err(HypothesisViolation::AlphaAboveP { alpha, p }.into());
    }
    let delta_upper = if p > 2.0 { 1.0 / (p - 2.0) } else { f64::INFINITY };
    if !(delta > 0.0 && delta < delta_upper) {
        return Err(HypothesisViolation::DeltaOutOfRange {
            delta,
            upper: delta_upper,
        }
        .into());
    }
    if !(theta > 0.0 && theta.is_finite()) {
        return Err(HypothesisViolation::ThetaNotPositive(theta).into());
    }
    let (h_vertex, h_min) = spec.h.min().expect("graph is nonempty");
    if !(h_min > 0.0) {
        return Err(HypothesisViolation::HNotPositive {
            min: h_min,
            vertex: h_vertex,
        }
        .into());
    }
    let (hmu_vertex, h_mu_min) = spec
        .h
        .iter()
        .zip(graph.measure())
        .map(|(h, m)| h * m)
        .enumerate()
        .fold((0, f64::INFINITY), |best, (x, v)| if v < best.1 { (x, v) } else { best });
    if !(h_mu_min > 0.0) {
        return Err(HypothesisViolation::HMuNotPositive {
            min: h_mu_min,
            vertex: hmu_vertex,
        }
        .into());
    }
    let (g_vertex, g_min) = spec.g.min().expect("graph is nonempty");
    if g_min < 0.0 {
        return Err(HypothesisViolation::GNegative {
            value: g_min,
            vertex: g_vertex,
        }
        .into());
    }
    let g_max = spec.g_max();
    let h_neg: Vec<f64> = spec.h.iter().map(|h| h.powf(-delta)).collect();
    let h_inverse_l_delta = weighted_sum(graph, &h_neg).powf(delta);
    if !h_inverse_l_delta.is_finite() {
        return Err(HypothesisViolation::HInverseNotIntegrable(h_inverse_l_delta).into());
    }
    if !graph.is_connected() {
        return Err(HypothesisViolation::Disconnected.into());
    }
    Ok(HypothesisReport {
        p,
        alpha,
        delta,
        delta_upper,
        theta,
        h_min,
        h_mu_min,
        g_min,
        g_max,
        h_inverse_l_delta,
        connected: true,
        pass: true,
    })
}

/// Defect of `-Δ_p u + h u^{p-1} = Λ g u^{α-1}` at a nonnegative `u`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub residual: Vec<f64>,
    pub sup: f64,
    /// `(∫ r^2 dμ)^{1/2}`
    pub l2: f64,
    pub argmax: usize,
    pub min_u: f64,
    pub min_u_vertex: usize,
}

/// Residual of `-Δ_p u + h u^{p-1} = g u^{α-1}`.
pub fn residual_report(graph: &WeightedGraph, spec: &ProblemSpec, u: &VertexFunction) -> Result<ResidualReport> {
    residual_report_with_factor(graph, spec, u, 1.0)
}

/// Residual of `-Δ_p u + h u^{p-1} = Λ g u^{α-1}` for an eigen-factor `Λ`.
pub fn residual_report_with_factor(
    graph: &WeightedGraph,
    spec: &ProblemSpec,
    u: &VertexFunction,
    eigen_factor: f64,
) -> Result<ResidualReport> {
    crate::operators::check_p(spec.p)?;
    spec.check_sizes(graph)?;
    graph.check_len(u)?;
    let (min_u_vertex, min_u) = u.min().expect("graph is nonempty");
    if min_u < 0.0 {
        return Err(Error::Argument(format!(
            "residual needs u >= 0 (u = {min_u} at vertex {min_u_vertex})"
        )));
    }
    let (p, alpha) = (spec.p, spec.alpha);
    let lap = p_laplacian_raw(graph, p, u.as_slice());
    let residual: Vec<f64> = (0..graph.n())
        .map(|x| {
            let v = u[x];
            -lap[x] + spec.h[x] * signed_pow(v, p - 1.0)
                - eigen_factor * spec.g[x] * signed_pow(v, alpha - 1.0)
        })
        .collect();
    let (argmax, sup) = residual
        .iter()
        .enumerate()
        .fold((0, 0.0), |best, (x, r)| if r.abs() > best.1 { (x, r.abs()) } else { best });
    let squares: Vec<f64> = residual.iter().map(|r| r * r).collect();
    let l2 = weighted_sum(graph, &squares).sqrt();
    Ok(ResidualReport {
        residual,
        sup,
        l2,
        argmax,
        min_u,
        min_u_vertex,
    })
}

/// A zero of `u` next to a positive value: the configuration the discrete
/// maximum principle rules out, since `Δ_p u(x) > 0` there.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlaggedVertex {
    pub vertex: usize,
    pub neighbor: usize,
    pub laplacian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityCertificate {
    pub min: f64,
    pub argmin: usize,
    pub has_negative: bool,
    pub flagged: Option<FlaggedVertex>,
    pub pass: bool,
}

pub fn positivity_certificate(graph: &WeightedGraph, p: f64, u: &VertexFunction) -> Result<PositivityCertificate> {
    crate::operators::check_p(p)?;
    graph.check_len(u)?;
    let (argmin, min) = u.min().expect("graph is nonempty");
    let mut flagged = None;
    if min == 0.0 {
        let lap = p_laplacian_raw(graph, p, u.as_slice());
        flagged = (0..graph.n()).filter(|&x| u[x] == 0.0).find_map(|x| {
            graph
                .neighbors(x)
                .iter()
                .find(|&&(y, _)| u[y] > 0.0)
                .map(|&(y, _)| FlaggedVertex {
                    vertex: x,
                    neighbor: y,
                    laplacian: lap[x],
                })
        });
    }
    Ok(PositivityCertificate {
        min,
        argmin,
        has_negative: min < 0.0,
        flagged,
        pass: min > 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityResult {
    pub name: String,
    pub draws: usize,
    pub violations: usize,
    /// Largest observed `lhs / rhs`.
    pub max_ratio: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub seed: u64,
    pub trials: usize,
    pub slack: f64,
    pub results: Vec<InequalityResult>,
    pub pass: bool,
}

#[derive(Default)]
struct Tally {
    draws: usize,
    violations: usize,
    max_ratio: f64,
}

impl Tally {
    fn check(&mut self, lhs: f64, rhs: f64) {
        self.draws += 1;
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        if ratio.is_nan() || ratio > 1.0 + INEQUALITY_SLACK {
            self.violations += 1;
        }
        if ratio.is_nan() {
            self.max_ratio = f64::NAN;
        } else {
            self.max_ratio = self.max_ratio.max(ratio);
        }
    }

    fn finish(self, name: &str) -> InequalityResult {
        InequalityResult {
            name: name.to_string(),
            draws: self.draws,
            violations: self.violations,
            max_ratio: self.max_ratio,
            pass: self.violations == 0,
        }
    }
}

fn random_function(rng: &mut ChaCha8Rng, n: usize, scale: f64, signed: bool) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let v = scale * rng.random::<f64>();
            if signed && rng.random::<bool>() {
                -v
            } else {
                v
            }
        })
        .collect()
}

/// Draws random functions and scalars and checks, with relative slack
/// [`INEQUALITY_SLACK`]:
///
/// - `elementary`: `|x^a - y^a| <= a|x-y|(x^{a-1} + y^{a-1})` for `x, y >= 0`, `a >= 1`;
/// - `h_pointwise`: `h^{-1/(p-2)} <= (inf h)^{-(1/(p-2)-δ)} h^{-δ}` for random admissible `δ`;
/// - `holder_embedding`: `∫|w|^{p/(p-1)} <= (∫h^{-1/(p-2)})^{(p-2)/(p-1)} (∫h|w|^p)^{1/(p-1)}`;
/// - `kprime_lipschitz`: the Lipschitz estimate of `K'` on `{|u| <= cap}`;
/// - `k_tail_chain`: the bound on `∫_{dist > R} G(x, u) dμ` through `∫_{dist > R} h^{-δ}`;
/// - `sup_bound`: `inf(hμ) |u(x)|^p <= J(u)` on random functions and on solver iterates.
///
/// Inequalities that need `p > 2` are skipped (zero draws) at `p = 2`.
pub fn inequality_suite(
    graph: &WeightedGraph,
    spec: &ProblemSpec,
    trials: usize,
    seed: u64,
) -> Result<InequalityReport> {
    if trials < 1 {
        return Err(Error::Argument("inequality suite needs at least one trial".into()));
    }
    spec.check_sizes(graph)?;
    crate::operators::check_p(spec.p)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = graph.n();
    let (p, alpha, delta) = (spec.p, spec.alpha, spec.delta);
    let h_min = spec.h_min();
    let h_mu_min = spec.h_mu_min(graph);

    let mut elementary = Tally::default();
    for _ in 0..trials {
        let x = 10.0 * rng.random::<f64>();
        let y = if rng.random::<f64>() < 0.05 { x } else { 10.0 * rng.random::<f64>() };
        let a = 1.0 + 5.0 * rng.random::<f64>();
        let lhs = (x.powf(a) - y.powf(a)).abs();
        let rhs = a * (x - y).abs() * (x.powf(a - 1.0) + y.powf(a - 1.0));
        elementary.check(lhs, rhs);
    }

    let mut pointwise = Tally::default();
    let mut holder = Tally::default();
    let mut lipschitz = Tally::default();
    if p > 2.0 {
        let upper = 1.0 / (p - 2.0);
        for _ in 0..trials {
            let d = if rng.random::<f64>() < 0.1 { delta } else { upper * rng.random::<f64>() };
            if !(d > 0.0) {
                continue;
            }
            let x = rng.random_range(0..n);
            let h = spec.h[x];
            pointwise.check(h.powf(-upper), h_min.powf(-(upper - d)) * h.powf(-d));
        }
        let h_pow: Vec<f64> = spec.h.iter().map(|h| h.powf(-upper)).collect();
        let h_pow_int = weighted_sum(graph, &h_pow);
        for _ in 0..trials {
            let scale = 10f64.powf(rng.random_range(-2.0..2.0));
            let w = random_function(&mut rng, n, scale, true);
            let lhs: Vec<f64> = w.iter().map(|v| v.abs().powf(p / (p - 1.0))).collect();
            let hw: Vec<f64> = w.iter().zip(spec.h.iter()).map(|(v, h)| h * v.abs().powf(p)).collect();
            let rhs = h_pow_int.powf((p - 2.0) / (p - 1.0))
                * weighted_sum(graph, &hw).powf(1.0 / (p - 1.0));
            holder.check(weighted_sum(graph, &lhs), rhs);
        }
        for _ in 0..trials {
            let cap = 0.1 + 3.0 * rng.random::<f64>();
            let u1 = VertexFunction::from_raw(random_function(&mut rng, n, cap, true));
            let u2 = VertexFunction::from_raw(random_function(&mut rng, n, cap, true));
            let xi = VertexFunction::from_raw(random_function(&mut rng, n, 1.0, true));
            let probe = kprime_lipschitz_probe(graph, spec, &u1, &u2, &xi, cap)?;
            lipschitz.check(probe.lhs, probe.rhs);
        }
    }

    let mut tail_chain = Tally::default();
    if p > 2.0 && alpha <= p {
        let dist = graph_distance(graph, 0)?;
        let ecc = dist.iter().copied().max().unwrap_or(0);
        let g_theta = spec.g_max().max(0.0) * spec.theta;
        for _ in 0..trials {
            let r = rng.random_range(0..=ecc);
            let scale = 10f64.powf(rng.random_range(-1.0..1.0));
            let u = random_function(&mut rng, n, scale, true);
            let outside = |x: &usize| dist[*x] > r;
            let lhs: f64 = (0..n)
                .filter(outside)
                .map(|x| graph.measure()[x] * nonlinearity_g(spec, x, u[x]))
                .sum();
            let tail_h: f64 = (0..n)
                .filter(outside)
                .map(|x| graph.measure()[x] * spec.h[x].powf(-delta))
                .sum();
            let energy = energy_raw(graph, spec, &u);
            let rhs = if p > alpha {
                let e = alpha / (p - alpha);
                g_theta
                    * (h_min.powf(-(e - delta)) * tail_h).powf((p - alpha) / p)
                    * energy.powf(alpha / p)
            } else {
                let e = 1.0 / (p - 2.0);
                let sup = u.iter().fold(0.0, |m: f64, v| m.max(v.max(0.0)));
                let tail_hu: f64 = (0..n)
                    .filter(outside)
                    .map(|x| graph.measure()[x] * spec.h[x] * u[x].max(0.0).powf(p))
                    .sum();
                g_theta
                    * sup.powf(p * (p - 2.0) / (p - 1.0))
                    * (h_min.powf(-(e - delta)) * tail_h).powf((p - 2.0) / (p - 1.0))
                    * tail_hu.powf(1.0 / (p - 1.0))
            };
            tail_chain.check(lhs, rhs);
        }
    }

    let mut sup_bound = Tally::default();
    let check_sup = |u: &[f64], tally: &mut Tally| {
        let energy = energy_raw(graph, spec, u);
        let largest = u.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        tally.check(h_mu_min * largest.powf(p), energy);
    };
    for _ in 0..trials {
        let scale = 10f64.powf(rng.random_range(-2.0..2.0));
        let u = random_function(&mut rng, n, scale, true);
        check_sup(&u, &mut sup_bound);
    }
    if spec.g.iter().any(|&g| g > 0.0) {
        let opts = SolveOptions {
            record_iterates: true,
            max_iters: trials.max(1),
            ..Default::default()
        };
        if let Ok(min) = minimize_constrained(graph, spec, &opts) {
            for u in &min.iterates {
                check_sup(u.as_slice(), &mut sup_bound);
            }
        }
    }

    let results = vec![
        elementary.finish("elementary"),
        pointwise.finish("h_pointwise"),
        holder.finish("holder_embedding"),
        lipschitz.finish("kprime_lipschitz"),
        tail_chain.finish("k_tail_chain"),
        sup_bound.finish("sup_bound"),
    ];
    let pass = results.iter().all(|r| r.pass);
    Ok(InequalityReport {
        seed,
        trials,
        slack: INEQUALITY_SLACK,
        results,
        pass,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustionRow {
    pub radius: usize,
    pub vertices: usize,
    pub gamma: f64,
    pub lambda: f64,
    /// `(∫_{dist > R} h^{-δ} dμ)^δ` on the full graph.
    pub tail: f64,
    pub tail_bound: f64,
    pub converged: bool,
    /// `|γ_R - γ_{R_prev}|`, absent on the first row.
    pub cauchy_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustionTable {
    pub rows: Vec<ExhaustionRow>,
    /// `γ` nonincreasing in `R` up to `1e-9`.
    pub monotone: bool,
}

/// Solves on nested hop balls around `x0` and tabulates `γ_R`, `λ_R` and the
/// tail bounds. `graph` is the largest representable piece of the family.
pub fn exhaustion_study(
    graph: &WeightedGraph,
    spec: &ProblemSpec,
    x0: usize,
    radii: &[usize],
    opts: &SolveOptions,
) -> Result<ExhaustionTable> {
    if radii.is_empty() {
        return Err(Error::Argument("exhaustion study needs at least one radius".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Argument("radii must be strictly increasing".into()));
    }
    let tails = tail_profile(graph, spec, x0)?;
    let solved: Vec<Result<ExhaustionRow>> = radii
        .par_iter()
        .map(|&radius| {
            let at = |e: Error| Error::AtRadius {
                radius,
                source: Box::new(e),
            };
            let ball = truncate_ball(graph, &TruncationSpec::new(x0, radius, 1.0)?).map_err(at)?;
            let sub = spec.on_ball(&ball).map_err(at)?;
            let sub_opts = SolveOptions {
                x0: ball.new_index[x0].expect("centre lies in its ball"),
                ..opts.clone()
            };
            let res = solve(&ball.graph, &sub, &sub_opts).map_err(at)?;
            let tail = tails[radius.min(tails.len() - 1)];
            Ok(ExhaustionRow {
                radius,
                vertices: ball.graph.n(),
                gamma: res.gamma,
                lambda: res.lambda,
                tail,
                tail_bound: k_tail_bound(graph, spec, tail, res.gamma),
                converged: res.converged,
                cauchy_gap: None,
            })
        })
        .collect();
    let mut rows = solved.into_iter().collect::<Result<Vec<_>>>()?;
    for i in 1..rows.len() {
        rows[i].cauchy_gap = Some((rows[i].gamma - rows[i - 1].gamma).abs());
    }
    let monotone = rows.windows(2).all(|w| w[1].gamma <= w[0].gamma + 1e-9);
    Ok(ExhaustionTable { rows, monotone })
}

/// `K(u)` on a graph, exposed for reports.
pub fn constraint_value(graph: &WeightedGraph, spec: &ProblemSpec, u: &VertexFunction) -> Result<f64> {
    spec.check_sizes(graph)?;
    graph.check_len(u)?;
    Ok(constraint_raw(graph, spec, u.as_slice()))
}
