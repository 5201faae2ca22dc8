//! Discrete p-Laplacian, p-gradient norm and the p-Dirichlet energy.

use crate::error::{Error, Result};
use crate::graph::{weighted_sum, VertexFunction, WeightedGraph};

/// Relative agreement required between the vertex-sum and edge-sum energies.
pub const ENERGY_IDENTITY_TOL: f64 = 1e-12;

pub(crate) fn check_p(p: f64) -> Result<()> {
    if p >= 2.0 && p.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!("p must be a finite real >= 2 (got {p})")))
    }
}

/// `|t|^{e} t` written as `sign(t)|t|^{e+1}`, so `t = 0` maps to 0 for every `e >= 0`.
#[inline]
pub(crate) fn signed_pow(t: f64, exponent: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else if exponent == 1.0 {
        t
    } else {
        t.signum() * t.abs().powf(exponent)
    }
}

pub(crate) fn p_laplacian_raw(graph: &WeightedGraph, p: f64, f: &[f64]) -> Vec<f64> {
    let m = graph.measure();
    (0..graph.n())
        .map(|x| {
            let s = graph
                .neighbors(x)
                .iter()
                .fold(0.0, |acc, &(y, w)| acc + w * signed_pow(f[y] - f[x], p - 1.0));
            s / m[x]
        })
        .collect()
}

/// `(Δ_p f)(x) = (1/μ(x)) Σ_{y~x} ω_xy |f(y)-f(x)|^{p-2} (f(y)-f(x))`.
pub fn p_laplacian(graph: &WeightedGraph, p: f64, f: &VertexFunction) -> Result<VertexFunction> {
    check_p(p)?;
    graph.check_len(f)?;
    Ok(VertexFunction::from_raw(p_laplacian_raw(graph, p, f.as_slice())))
}

/// The linear μ-Laplacian `(1/μ(x)) Σ_{y~x} ω_xy (f(y)-f(x))`.
pub fn linear_laplacian(graph: &WeightedGraph, f: &VertexFunction) -> Result<VertexFunction> {
    graph.check_len(f)?;
    let m = graph.measure();
    Ok(VertexFunction::from_raw(
        (0..graph.n())
            .map(|x| {
                graph
                    .neighbors(x)
                    .iter()
                    .fold(0.0, |acc, &(y, w)| acc + w * (f[y] - f[x]))
                    / m[x]
            })
            .collect(),
    ))
}

/// Per-vertex `|∇_p f(x)|^p = (1/(2μ(x))) Σ_{y~x} ω_xy |f(y)-f(x)|^p`.
pub(crate) fn gradient_power_raw(graph: &WeightedGraph, p: f64, f: &[f64]) -> Vec<f64> {
    let m = graph.measure();
    (0..graph.n())
        .map(|x| {
            let s = graph
                .neighbors(x)
                .iter()
                .fold(0.0, |acc, &(y, w)| acc + w * (f[y] - f[x]).abs().powf(p));
            s / (2.0 * m[x])
        })
        .collect()
}

pub fn p_gradient_norm(graph: &WeightedGraph, p: f64, f: &VertexFunction) -> Result<VertexFunction> {
    check_p(p)?;
    graph.check_len(f)?;
    Ok(VertexFunction::from_raw(
        gradient_power_raw(graph, p, f.as_slice())
            .into_iter()
            .map(|s| s.powf(1.0 / p))
            .collect(),
    ))
}

/// Unordered-edge form `Σ_{{x,y}∈E} ω_xy |f(y)-f(x)|^p`.
pub(crate) fn edge_energy_raw(graph: &WeightedGraph, p: f64, f: &[f64]) -> f64 {
    graph
        .edges()
        .fold(0.0, |acc, (x, y, w)| acc + w * (f[y] - f[x]).abs().powf(p))
}

/// Both forms of `∫ |∇_p f|^p dμ`: the vertex sum and the edge sum.
pub fn dirichlet_energy_forms(graph: &WeightedGraph, p: f64, f: &VertexFunction) -> Result<(f64, f64)> {
    check_p(p)?;
    graph.check_len(f)?;
    let vertex = weighted_sum(graph, &gradient_power_raw(graph, p, f.as_slice()));
    let edge = edge_energy_raw(graph, p, f.as_slice());
    Ok((vertex, edge))
}

/// `∫ |∇_p f|^p dμ`, returned as the edge sum after checking it against the
/// vertex sum.
pub fn dirichlet_energy(graph: &WeightedGraph, p: f64, f: &VertexFunction) -> Result<f64> {
    let (vertex, edge) = dirichlet_energy_forms(graph, p, f)?;
    let scale = vertex.abs().max(edge.abs());
    if (vertex - edge).abs() > ENERGY_IDENTITY_TOL * scale {
        return Err(Error::Consistency(format!(
            "vertex-sum energy {vertex:e} and edge-sum energy {edge:e} disagree"
        )));
    }
    Ok(edge)
}

/// Returns `(∫ -f Δ_p f dμ, ∫ |∇_p f|^p dμ)`.
pub fn ibp_identity_check(graph: &WeightedGraph, p: f64, f: &VertexFunction) -> Result<(f64, f64)> {
    check_p(p)?;
    graph.check_len(f)?;
    let lap = p_laplacian_raw(graph, p, f.as_slice());
    let pairing: Vec<f64> = f.iter().zip(&lap).map(|(v, l)| -v * l).collect();
    let lhs = weighted_sum(graph, &pairing);
    let rhs = dirichlet_energy(graph, p, f)?;
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, GeneratorOptions, GraphFamily};
    use approx::assert_relative_eq;

    fn edge() -> WeightedGraph {
        WeightedGraph::from_edges(2, &[(0, 1, 1.0)], vec![1.0, 1.0]).unwrap()
    }

    fn vf(v: &[f64]) -> VertexFunction {
        VertexFunction::new(v.to_vec()).unwrap()
    }

    #[test]
    fn p_laplacian_examples() {
        let g = edge();
        let c = VertexFunction::constant(2, 3.5);
        assert_eq!(p_laplacian(&g, 3.0, &c).unwrap().as_slice(), &[0.0, 0.0]);
        let f = vf(&[0.0, 2.0]);
        let l3 = p_laplacian(&g, 3.0, &f).unwrap();
        assert_relative_eq!(l3[0], 4.0, max_relative = 1e-15);
        assert_relative_eq!(l3[1], -4.0, max_relative = 1e-15);
        assert_eq!(p_laplacian(&g, 2.0, &f).unwrap().as_slice(), &[2.0, -2.0]);
        assert!(p_laplacian(&g, 1.5, &f).is_err());
    }

    #[test]
    fn gradient_norm_examples() {
        let g = edge();
        let c = VertexFunction::constant(2, -1.0);
        assert_eq!(p_gradient_norm(&g, 3.0, &c).unwrap().as_slice(), &[0.0, 0.0]);
        let f = vf(&[0.0, 2.0]);
        let n = p_gradient_norm(&g, 3.0, &f).unwrap();
        for x in 0..2 {
            assert_relative_eq!(n[x], 4f64.powf(1.0 / 3.0), max_relative = 1e-15);
        }
        // star: center 0 with three leaves
        let star = WeightedGraph::from_edges(
            4,
            &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)],
            vec![1.0; 4],
        )
        .unwrap();
        let f = vf(&[1.0, 0.0, 0.0, 0.0]);
        let n = p_gradient_norm(&star, 2.0, &f).unwrap();
        assert_relative_eq!(n[0], (3.0f64 / 2.0).sqrt(), max_relative = 1e-15);
        assert!(p_gradient_norm(&star, 1.0, &f).is_err());
    }

    #[test]
    fn energy_examples() {
        let g = edge();
        assert_eq!(dirichlet_energy(&g, 3.0, &VertexFunction::constant(2, 7.0)).unwrap(), 0.0);
        assert_relative_eq!(
            dirichlet_energy(&g, 3.0, &vf(&[0.0, 2.0])).unwrap(),
            8.0,
            max_relative = 1e-15
        );
        let path = generate(GraphFamily::Path { n: 3 }, GeneratorOptions::default()).unwrap();
        assert_eq!(dirichlet_energy(&path, 2.0, &vf(&[0.0, 1.0, 3.0])).unwrap(), 5.0);
    }

    #[test]
    fn ibp_examples() {
        let g = edge();
        assert_eq!(
            ibp_identity_check(&g, 3.0, &VertexFunction::constant(2, 1.0)).unwrap(),
            (0.0, 0.0)
        );
        let (lhs, rhs) = ibp_identity_check(&g, 3.0, &vf(&[0.0, 2.0])).unwrap();
        assert_relative_eq!(lhs, 8.0, max_relative = 1e-15);
        assert_relative_eq!(rhs, 8.0, max_relative = 1e-15);
    }

    #[test]
    fn self_loops_are_inert() {
        let looped =
            WeightedGraph::from_edges(2, &[(0, 1, 1.0), (0, 0, 9.0)], vec![1.0, 1.0]).unwrap();
        let f = vf(&[0.0, 2.0]);
        assert_eq!(
            p_laplacian(&looped, 3.0, &f).unwrap(),
            p_laplacian(&edge(), 3.0, &f).unwrap()
        );
        assert_eq!(dirichlet_energy(&looped, 3.0, &f).unwrap(), 8.0);
    }

    #[test]
    fn signed_pow_at_zero() {
        assert_eq!(signed_pow(0.0, 0.0), 0.0);
        assert_eq!(signed_pow(0.0, 1.0), 0.0);
        assert_eq!(signed_pow(-2.0, 2.0), -4.0);
    }
}
