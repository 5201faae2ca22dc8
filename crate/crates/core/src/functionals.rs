//! Energy `J`, the cut-off nonlinearity `G`, the constraint `K` and their
//! derivatives.

use crate::error::{Error, Result};
use crate::graph::{weighted_sum, Ball, VertexFunction, WeightedGraph};
use crate::operators::{check_p, edge_energy_raw, p_laplacian_raw, signed_pow};
use crate::operators;

/// One instance of `-Δ_p u + h|u|^{p-2}u = g u^{α-1}` together with the
/// scale `θ` of the constraint functional.
///
/// Fields are not validated on construction; run
/// [`hypotheses_check`](crate::verify::hypotheses_check) before solving.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub p: f64,
    pub alpha: f64,
    pub delta: f64,
    pub theta: f64,
    pub h: VertexFunction,
    pub g: VertexFunction,
}

impl ProblemSpec {
    pub fn new(p: f64, alpha: f64, delta: f64, theta: f64, h: VertexFunction, g: VertexFunction) -> Self {
        ProblemSpec {
            p,
            alpha,
            delta,
            theta,
            h,
            g,
        }
    }

    /// Same instance with a different `θ`.
    pub fn with_theta(&self, theta: f64) -> Self {
        ProblemSpec {
            theta,
            ..self.clone()
        }
    }

    /// The instance on a hop ball with zero exterior: `g` restricted and
    /// `h(x) + Σ_{y outside} ω_xy / μ(x)`, which adds the energy of the edges
    /// to the exterior. Then `J`, `K` and the Euler–Lagrange equation on the
    /// ball agree with the full graph evaluated at the zero extension.
    pub fn on_ball(&self, ball: &Ball) -> Result<Self> {
        let h = ball.restrict(&self.h)?;
        let mu = ball.graph.measure();
        let h = VertexFunction::new(
            h.iter()
                .zip(&ball.boundary_weight)
                .zip(mu)
                .map(|((h, b), m)| h + b / m)
                .collect(),
        )?;
        Ok(ProblemSpec {
            h,
            g: ball.restrict(&self.g)?,
            ..self.clone()
        })
    }

    pub fn h_min(&self) -> f64 {
        self.h.min().map_or(f64::NAN, |(_, v)| v)
    }

    pub fn g_max(&self) -> f64 {
        self.g.max().map_or(f64::NAN, |(_, v)| v)
    }

    /// `inf_x h(x)μ(x)`.
    pub fn h_mu_min(&self, graph: &WeightedGraph) -> f64 {
        self.h
            .iter()
            .zip(graph.measure())
            .fold(f64::INFINITY, |m, (h, mu)| m.min(h * mu))
    }

    pub(crate) fn check_sizes(&self, graph: &WeightedGraph) -> Result<()> {
        graph.check_len(&self.h)?;
        graph.check_len(&self.g)
    }

    fn check(&self, graph: &WeightedGraph, u: &VertexFunction) -> Result<()> {
        check_p(self.p)?;
        self.check_sizes(graph)?;
        graph.check_len(u)
    }
}

pub(crate) fn energy_raw(graph: &WeightedGraph, spec: &ProblemSpec, u: &[f64]) -> f64 {
    let p = spec.p;
    let potential: Vec<f64> = u
        .iter()
        .zip(spec.h.iter())
        .map(|(v, h)| h * v.abs().powf(p))
        .collect();
    edge_energy_raw(graph, p, u) + weighted_sum(graph, &potential)
}

/// `J(u) = ∫ (|∇_p u|^p + h|u|^p) dμ`.
pub fn energy_j(graph: &WeightedGraph, spec: &ProblemSpec, u: &VertexFunction) -> Result<f64> {
    spec.check(graph, u)?;
    let gradient = operators::dirichlet_energy(graph, spec.p, u)?;
    let potential: Vec<f64> = u
        .iter()
        .zip(spec.h.iter())
        .map(|(v, h)| h * v.abs().powf(spec.p))
        .collect();
    Ok(gradient + weighted_sum(graph, &potential))
}

/// `‖u‖_𝓗 = J(u)^{1/p}`.
pub fn h_norm(graph: &WeightedGraph, spec: &ProblemSpec, u: &VertexFunction) -> Result<f64> {
    Ok(energy_j(graph, spec, u)?.powf(1.0 / spec.p))
}

/// `G(x, s) = g(x) θ s^α` for `s >= 0`, zero otherwise.
pub fn nonlinearity_g(spec: &ProblemSpec, x: usize, s: f64) -> f64 {
    if s > 0.0 {
        spec.g[x] * spec.theta * s.powf(spec.alpha)
    } else {
        0.0
    }
}

/// `∂_s G(x, s) = α g(x) θ s^{α-1}` for `s >= 0`, zero otherwise.
pub fn nonlinearity_g_prime(spec: &ProblemSpec, x: usize, s: f64) -> f64 {
    if s > 0.0 {
        spec.alpha * spec.g[x] * spec.theta * s.powf(spec.alpha - 1.0)
    } else {
        0.0
    }
}

pub(crate) fn constraint_raw(graph: &WeightedGraph, spec: &ProblemSpec, u: &[f64]) -> f64 {
    let density: Vec<f64> = u
        .iter()
        .enumerate()
        .map(|(x, &s)| nonlinearity_g(spec, x, s))
        .collect();
    weighted_sum(graph, &density)
}

pub(crate) fn constraint_gradient_raw(spec: &ProblemSpec, u: &[f64]) -> Vec<f64> {
    u.iter()
        .enumerate()
        .map(|(x, &s)| nonlinearity_g_prime(spec, x, s))
        .collect()
}

/// `K(u) = ∫ G(x, u(x)) dμ`.
pub fn constraint_k(graph: &WeightedGraph, spec: &ProblemSpec, u: &VertexFunction) -> Result<f64> {
    spec.check(graph, u)?;
    Ok(constraint_raw(graph, spec, u.as_slice()))
}

/// Density of `K'(u)` with respect to `μ`: `x ↦ G'(x, u(x))`.
pub fn k_gradient(graph: &WeightedGraph, spec: &ProblemSpec, u: &VertexFunction) -> Result<VertexFunction> {
    spec.check(graph, u)?;
    Ok(VertexFunction::from_raw(constraint_gradient_raw(spec, u.as_slice())))
}

/// `K'(u)(v) = ∫ G'(x, u(x)) v(x) dμ`.
pub fn k_derivative_action(
    graph: &WeightedGraph,
    spec: &ProblemSpec,
    u: &VertexFunction,
    v: &VertexFunction,
) -> Result<f64> {
    spec.check(graph, u)?;
    graph.check_len(v)?;
    let k = constraint_gradient_raw(spec, u.as_slice());
    let prod: Vec<f64> = k.iter().zip(v).map(|(a, b)| a * b).collect();
    Ok(weighted_sum(graph, &prod))
}

pub(crate) fn energy_gradient_raw(graph: &WeightedGraph, spec: &ProblemSpec, u: &[f64]) -> Vec<f64> {
    let p = spec.p;
    p_laplacian_raw(graph, p, u)
        .into_iter()
        .zip(u.iter().zip(spec.h.iter()))
        .map(|(lap, (&v, h))| -p * lap + p * h * signed_pow(v, p - 1.0))
        .collect()
}

/// Density of `J'(u)`: `w = -pΔ_p u + p h |u|^{p-2} u`, so that
/// `d/dt J(u + tφ)|_0 = ∫ w φ dμ`.
pub fn j_gradient(graph: &WeightedGraph, spec: &ProblemSpec, u: &VertexFunction) -> Result<VertexFunction> {
    spec.check(graph, u)?;
    Ok(VertexFunction::from_raw(energy_gradient_raw(graph, spec, u.as_slice())))
}

/// Finite-difference step `1e-5 (1 + ‖u‖_∞)`.
pub fn fd_step(u: &VertexFunction) -> f64 {
    1e-5 * (1.0 + u.sup_norm())
}

/// Central difference of `t ↦ f(u + t v)` at `t = 0`.
pub fn central_difference(
    f: impl Fn(&VertexFunction) -> Result<f64>,
    u: &VertexFunction,
    v: &VertexFunction,
    step: f64,
) -> Result<f64> {
    let shifted = |t: f64| {
        VertexFunction::new(u.iter().zip(v).map(|(a, b)| a + t * b).collect())
    };
    let plus = f(&shifted(step)?)?;
    let minus = f(&shifted(-step)?)?;
    Ok((plus - minus) / (2.0 * step))
}

/// Default bound on `|u|` used by the Lipschitz estimate of `K'`: every
/// function with `J(u) <= budget` satisfies `|u(x)| <= (budget / inf hμ)^{1/p}`.
pub fn default_cap(graph: &WeightedGraph, spec: &ProblemSpec, j_budget: f64) -> f64 {
    (j_budget / spec.h_mu_min(graph)).powf(1.0 / spec.p)
}

/// Result of probing the Lipschitz estimate for `K'`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzProbe {
    /// `|(K'(u1) - K'(u2)) ξ|`
    pub lhs: f64,
    /// `C ‖ξ‖_𝓗 ‖u1 - u2‖_𝓗`
    pub rhs: f64,
    pub constant: f64,
}

impl LipschitzProbe {
    pub fn holds(&self, rel_slack: f64) -> bool {
        self.lhs <= self.rhs * (1.0 + rel_slack)
    }
}

/// Lipschitz constant of `K'` on `{|u| <= cap}` in the 𝓗 norm, assembled from
/// the chain: mean-value bound on `G'`, Hölder on `∫|u1-u2||ξ|`, the
/// `L^{p/(p-1)}` embedding and the pointwise bound on `h^{-1/(p-2)}`.
pub fn kprime_lipschitz_constant(graph: &WeightedGraph, spec: &ProblemSpec, cap: f64) -> Result<f64> {
    let (p, a, delta) = (spec.p, spec.alpha, spec.delta);
    if !(p > 2.0) {
        return Err(Error::Argument(format!("Lipschitz estimate needs p > 2 (got {p})")));
    }
    spec.check_sizes(graph)?;
    let h_min = spec.h_min();
    let g_max = spec.g_max().max(0.0);
    let pointwise = a * (a - 1.0) * spec.theta * g_max * 2.0 * cap.powf(a - 2.0);
    let lp_from_h = h_min.powf(-1.0 / p);
    let h_neg_delta: Vec<f64> = spec.h.iter().map(|h| h.powf(-delta)).collect();
    let embedding = (h_min.powf(-(1.0 / (p - 2.0) - delta)) * weighted_sum(graph, &h_neg_delta))
        .powf((p - 2.0) / p);
    Ok(pointwise * lp_from_h * embedding)
}

/// Evaluates both sides of `|(K'(u1) - K'(u2)) ξ| <= C ‖ξ‖_𝓗 ‖u1 - u2‖_𝓗`.
pub fn kprime_lipschitz_probe(
    graph: &WeightedGraph,
    spec: &ProblemSpec,
    u1: &VertexFunction,
    u2: &VertexFunction,
    xi: &VertexFunction,
    cap: f64,
) -> Result<LipschitzProbe> {
    spec.check(graph, u1)?;
    graph.check_len(u2)?;
    graph.check_len(xi)?;
    let largest = u1.sup_norm().max(u2.sup_norm());
    if largest > cap {
        return Err(Error::Argument(format!(
            "sup norm {largest} exceeds the cap {cap}"
        )));
    }
    let k1 = constraint_gradient_raw(spec, u1.as_slice());
    let k2 = constraint_gradient_raw(spec, u2.as_slice());
    let prod: Vec<f64> = k1
        .iter()
        .zip(&k2)
        .zip(xi)
        .map(|((a, b), c)| (a - b) * c)
        .collect();
    let lhs = weighted_sum(graph, &prod).abs();
    let constant = kprime_lipschitz_constant(graph, spec, cap)?;
    let diff = VertexFunction::from_raw(u1.iter().zip(u2).map(|(a, b)| a - b).collect());
    let rhs = constant * h_norm(graph, spec, xi)? * h_norm(graph, spec, &diff)?;
    Ok(LipschitzProbe { lhs, rhs, constant })
}
