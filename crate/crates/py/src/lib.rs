//! Python module `yamabe`: graphs, problem data, operators and the solver.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use yamabe_core as core;
use yamabe_core::{GeneratorOptions, GraphFamily, VertexFunction};

fn to_py(err: core::Error) -> PyErr {
    if err.is_validation() {
        PyValueError::new_err(err.to_string())
    } else {
        PyRuntimeError::new_err(err.to_string())
    }
}

fn vf(values: Vec<f64>) -> PyResult<VertexFunction> {
    VertexFunction::new(values).map_err(to_py)
}

/// Serializes through JSON so reports arrive as plain dicts.
fn json_to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Graph", frozen)]
struct Graph(core::WeightedGraph);

#[pymethods]
impl Graph {
    #[new]
    fn new(n: usize, edges: Vec<(usize, usize, f64)>, mu: Vec<f64>) -> PyResult<Self> {
        core::WeightedGraph::from_edges(n, &edges, mu).map(Graph).map_err(to_py)
    }

    #[staticmethod]
    #[pyo3(signature = (n, weight = 1.0, measure = 1.0))]
    fn path(n: usize, weight: f64, measure: f64) -> PyResult<Self> {
        generated(GraphFamily::Path { n }, weight, measure)
    }

    #[staticmethod]
    #[pyo3(signature = (n, weight = 1.0, measure = 1.0))]
    fn cycle(n: usize, weight: f64, measure: f64) -> PyResult<Self> {
        generated(GraphFamily::Cycle { n }, weight, measure)
    }

    #[staticmethod]
    #[pyo3(signature = (dim, radius, weight = 1.0, measure = 1.0))]
    fn lattice(dim: usize, radius: usize, weight: f64, measure: f64) -> PyResult<Self> {
        generated(GraphFamily::LatticeZdBall { dim, radius }, weight, measure)
    }

    #[staticmethod]
    #[pyo3(signature = (branching, depth, weight = 1.0, measure = 1.0))]
    fn tree(branching: usize, depth: usize, weight: f64, measure: f64) -> PyResult<Self> {
        generated(GraphFamily::TreeBall { branching, depth }, weight, measure)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        core::WeightedGraph::from_json_str(text).map(Graph).map_err(to_py)
    }

    fn to_json(&self) -> String {
        self.0.to_json_string()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    #[getter]
    fn measure(&self) -> Vec<f64> {
        self.0.measure().to_vec()
    }

    /// Unordered edges `(x, y, w)` with `x <= y`.
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.0.edges().collect()
    }

    fn distance(&self, x0: usize) -> PyResult<Vec<usize>> {
        core::graph_distance(&self.0, x0).map_err(to_py)
    }

    fn integrate(&self, f: Vec<f64>) -> PyResult<f64> {
        core::integrate(&self.0, &vf(f)?).map_err(to_py)
    }

    /// Induced subgraph on the hop ball: `(graph, kept vertex ids, boundary weights)`.
    fn ball(&self, x0: usize, radius: usize) -> PyResult<(Graph, Vec<usize>, Vec<f64>)> {
        let ball = hop_ball(&self.0, x0, radius)?;
        Ok((Graph(ball.graph), ball.old_index, ball.boundary_weight))
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={})", self.0.n(), self.0.edge_count())
    }
}

fn hop_ball(graph: &core::WeightedGraph, x0: usize, radius: usize) -> PyResult<core::Ball> {
    let spec = core::TruncationSpec::new(x0, radius, 1.0).map_err(to_py)?;
    core::truncate_ball(graph, &spec).map_err(to_py)
}

fn generated(family: GraphFamily, weight: f64, measure: f64) -> PyResult<Graph> {
    core::generate(family, GeneratorOptions { weight, measure })
        .map(Graph)
        .map_err(to_py)
}

#[pyclass(name = "Problem", frozen)]
struct Problem(core::ProblemSpec);

#[pymethods]
impl Problem {
    #[new]
    #[pyo3(signature = (p, alpha, delta, h, g, theta = 1.0))]
    fn new(p: f64, alpha: f64, delta: f64, h: Vec<f64>, g: Vec<f64>, theta: f64) -> PyResult<Self> {
        Ok(Problem(core::ProblemSpec::new(p, alpha, delta, theta, vf(h)?, vf(g)?)))
    }

    fn with_theta(&self, theta: f64) -> Self {
        Problem(self.0.with_theta(theta))
    }

    #[getter]
    fn p(&self) -> f64 {
        self.0.p
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.alpha
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta
    }

    #[getter]
    fn theta(&self) -> f64 {
        self.0.theta
    }

    #[getter]
    fn h(&self) -> Vec<f64> {
        self.0.h.as_slice().to_vec()
    }

    #[getter]
    fn g(&self) -> Vec<f64> {
        self.0.g.as_slice().to_vec()
    }

    fn __repr__(&self) -> String {
        let s = &self.0;
        format!("Problem(p={}, alpha={}, delta={}, theta={}, n={})", s.p, s.alpha, s.delta, s.theta, s.h.len())
    }
}

#[pyclass(name = "Solution", frozen)]
struct Solution(core::SolveResult);

#[pymethods]
impl Solution {
    #[getter]
    fn u(&self) -> Vec<f64> {
        self.0.u.as_slice().to_vec()
    }

    #[getter]
    fn u_bar(&self) -> Vec<f64> {
        self.0.u_bar.as_slice().to_vec()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma
    }

    /// The Lagrange multiplier `λ`.
    #[getter]
    fn multiplier(&self) -> f64 {
        self.0.lambda
    }

    #[getter]
    fn scale(&self) -> f64 {
        self.0.scale
    }

    #[getter]
    fn eigen_factor(&self) -> f64 {
        self.0.eigen_factor
    }

    #[getter]
    fn eigen_factor_is_one(&self) -> bool {
        self.0.eigen_factor_is_one
    }

    #[getter]
    fn residual(&self) -> Vec<f64> {
        self.0.residual.residual.clone()
    }

    #[getter]
    fn residual_sup(&self) -> f64 {
        self.0.residual.sup
    }

    #[getter]
    fn constraint(&self) -> f64 {
        self.0.constraint
    }

    #[getter]
    fn stationarity(&self) -> f64 {
        self.0.stationarity
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.0.iters
    }

    #[getter]
    fn converged(&self) -> bool {
        self.0.converged
    }

    #[getter]
    fn success(&self) -> bool {
        self.0.success
    }

    /// Per-iteration energy, constraint, stationarity and step.
    fn trace<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        json_to_py(py, &self.0.trace)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(gamma={}, multiplier={}, residual_sup={:e}, success={})",
            self.0.gamma, self.0.lambda, self.0.residual.sup, self.0.success
        )
    }
}

#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (graph, problem, *, max_iters = 50_000, grad_tol = 1e-9, seed = 0, init = "bump", x0 = 0))]
fn solve(
    py: Python<'_>,
    graph: &Graph,
    problem: &Problem,
    max_iters: usize,
    grad_tol: f64,
    seed: u64,
    init: &str,
    x0: usize,
) -> PyResult<Solution> {
    let init = match init {
        "bump" => core::Init::Bump,
        "uniform" => core::Init::Uniform,
        other => return Err(PyValueError::new_err(format!("unknown init {other:?}; use \"bump\" or \"uniform\""))),
    };
    let opts = core::SolveOptions {
        max_iters,
        grad_tol,
        seed,
        init,
        x0,
        ..Default::default()
    };
    py.detach(|| core::solve(&graph.0, &problem.0, &opts))
        .map(Solution)
        .map_err(to_py)
}

/// The instance restricted to a hop ball with zero exterior:
/// `(graph, problem, kept vertex ids)`.
#[pyfunction]
fn truncate(graph: &Graph, problem: &Problem, x0: usize, radius: usize) -> PyResult<(Graph, Problem, Vec<usize>)> {
    let ball = hop_ball(&graph.0, x0, radius)?;
    let local = problem.0.on_ball(&ball).map_err(to_py)?;
    Ok((Graph(ball.graph), Problem(local), ball.old_index))
}

#[pyfunction]
fn p_laplacian(graph: &Graph, p: f64, u: Vec<f64>) -> PyResult<Vec<f64>> {
    core::p_laplacian(&graph.0, p, &vf(u)?).map(VertexFunction::into_vec).map_err(to_py)
}

#[pyfunction]
fn p_gradient_norm(graph: &Graph, p: f64, u: Vec<f64>) -> PyResult<Vec<f64>> {
    core::p_gradient_norm(&graph.0, p, &vf(u)?).map(VertexFunction::into_vec).map_err(to_py)
}

#[pyfunction]
fn dirichlet_energy(graph: &Graph, p: f64, u: Vec<f64>) -> PyResult<f64> {
    core::dirichlet_energy(&graph.0, p, &vf(u)?).map_err(to_py)
}

#[pyfunction]
fn energy_j(graph: &Graph, problem: &Problem, u: Vec<f64>) -> PyResult<f64> {
    core::energy_j(&graph.0, &problem.0, &vf(u)?).map_err(to_py)
}

#[pyfunction]
fn constraint_k(graph: &Graph, problem: &Problem, u: Vec<f64>) -> PyResult<f64> {
    core::constraint_k(&graph.0, &problem.0, &vf(u)?).map_err(to_py)
}

#[pyfunction]
fn j_gradient(graph: &Graph, problem: &Problem, u: Vec<f64>) -> PyResult<Vec<f64>> {
    core::j_gradient(&graph.0, &problem.0, &vf(u)?).map(VertexFunction::into_vec).map_err(to_py)
}

#[pyfunction]
fn k_gradient(graph: &Graph, problem: &Problem, u: Vec<f64>) -> PyResult<Vec<f64>> {
    core::k_gradient(&graph.0, &problem.0, &vf(u)?).map(VertexFunction::into_vec).map_err(to_py)
}

#[pyfunction]
fn hypotheses_check<'py>(py: Python<'py>, graph: &Graph, problem: &Problem) -> PyResult<Bound<'py, PyAny>> {
    let report = core::hypotheses_check(&graph.0, &problem.0).map_err(to_py)?;
    json_to_py(py, &report)
}

#[pyfunction]
fn residual_report<'py>(py: Python<'py>, graph: &Graph, problem: &Problem, u: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    let report = core::residual_report(&graph.0, &problem.0, &vf(u)?).map_err(to_py)?;
    json_to_py(py, &report)
}

#[pyfunction]
#[pyo3(signature = (graph, problem, trials = 1000, seed = 0))]
fn inequality_suite<'py>(
    py: Python<'py>,
    graph: &Graph,
    problem: &Problem,
    trials: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let report = core::inequality_suite(&graph.0, &problem.0, trials, seed).map_err(to_py)?;
    json_to_py(py, &report)
}

#[pymodule]
fn yamabe(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Graph>()?;
    m.add_class::<Problem>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(truncate, m)?)?;
    m.add_function(wrap_pyfunction!(p_laplacian, m)?)?;
    m.add_function(wrap_pyfunction!(p_gradient_norm, m)?)?;
    m.add_function(wrap_pyfunction!(dirichlet_energy, m)?)?;
    m.add_function(wrap_pyfunction!(energy_j, m)?)?;
    m.add_function(wrap_pyfunction!(constraint_k, m)?)?;
    m.add_function(wrap_pyfunction!(j_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(k_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(hypotheses_check, m)?)?;
    m.add_function(wrap_pyfunction!(residual_report, m)?)?;
    m.add_function(wrap_pyfunction!(inequality_suite, m)?)?;
    Ok(())
}
