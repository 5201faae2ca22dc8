//! Weighted graphs with a vertex measure, vertex functions, integration,
//! hop distance, ball truncation and deterministic generators.

use std::collections::{HashMap, VecDeque};
use std::ops::Index;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A real value per vertex. Entries are always finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct VertexFunction(Vec<f64>);

impl VertexFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Argument(format!(
                "vertex function has non-finite value {} at vertex {i}",
                values[i]
            )));
        }
        Ok(VertexFunction(values))
    }

    pub fn constant(n: usize, value: f64) -> Self {
        VertexFunction(vec![value; n])
    }

    pub fn zeros(n: usize) -> Self {
        Self::constant(n, 0.0)
    }

    /// Builds from values produced by the library's own kernels.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        VertexFunction(values)
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize) -> f64) -> Result<Self> {
        Self::new((0..n).map(f).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.0.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        VertexFunction(self.0.iter().map(|v| c * v).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> Option<(usize, f64)> {
        self.0
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, v)| match best {
                Some((_, b)) if b <= v => best,
                _ => Some((i, v)),
            })
    }

    pub fn max(&self) -> Option<(usize, f64)> {
        self.0
            .iter()
            .copied()
            .enumerate()
            .fold(None, |best, (i, v)| match best {
                Some((_, b)) if b >= v => best,
                _ => Some((i, v)),
            })
    }
}

impl Index<usize> for VertexFunction {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<'a> IntoIterator for &'a VertexFunction {
    type Item = &'a f64;
    type IntoIter = std::slice::Iter<'a, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Connected, locally finite graph with symmetric positive edge weights and a
/// positive vertex measure. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
    measure: Vec<f64>,
}

impl WeightedGraph {
    /// Builds a graph from unordered edges `(x, y, w)`, each pair listed once.
    /// Self-loops are kept but never contribute to difference operators.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], measure: Vec<f64>) -> Result<Self> {
        let graph = Self::from_edges_unchecked_connectivity(n, edges, measure)?;
        if !graph.is_connected() {
            return Err(Error::Graph("graph is not connected".into()));
        }
        Ok(graph)
    }

    fn from_edges_unchecked_connectivity(
        n: usize,
        edges: &[(usize, usize, f64)],
        measure: Vec<f64>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("graph needs at least one vertex".into()));
        }
        if measure.len() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: measure.len(),
            });
        }
        if let Some(x) = measure.iter().position(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Graph(format!(
                "measure must be positive and finite (mu[{x}] = {})",
                measure[x]
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut seen = HashMap::with_capacity(edges.len());
        for &(x, y, w) in edges {
            if x >= n || y >= n {
                return Err(Error::Graph(format!("edge ({x}, {y}) out of range for {n} vertices")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::Graph(format!(
                    "edge ({x}, {y}) has weight {w}; stored weights must be positive and finite"
                )));
            }
            if seen.insert((x.min(y), x.max(y)), ()).is_some() {
                return Err(Error::Graph(format!("edge ({x}, {y}) listed more than once")));
            }
            adjacency[x].push((y, w));
            if x != y {
                adjacency[y].push((x, w));
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(y, _)| y);
        }
        Ok(WeightedGraph { adjacency, measure })
    }

    /// Loads the JSON graph format `{"n": .., "edges": [[x, y, w], ..], "mu": [..]}`.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let file: GraphFile = serde_json::from_str(text)?;
        Self::from_edges(file.n, &file.edges, file.mu)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        let file = GraphFile {
            n: self.n(),
            edges: self.edges().collect(),
            mu: self.measure.clone(),
        };
        serde_json::to_string(&file).expect("graph serializes")
    }

    pub fn n(&self) -> usize {
        self.measure.len()
    }

    pub fn measure(&self) -> &[f64] {
        &self.measure
    }

    pub fn neighbors(&self, x: usize) -> &[(usize, f64)] {
        &self.adjacency[x]
    }

    /// Unordered edges `(x, y, w)` with `x <= y`, ascending by `x` then `y`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(x, list)| {
            list.iter()
                .filter(move |&&(y, _)| y >= x)
                .map(move |&(y, w)| (x, y, w))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn weight(&self, x: usize, y: usize) -> f64 {
        self.adjacency[x]
            .binary_search_by_key(&y, |&(z, _)| z)
            .map(|i| self.adjacency[x][i].1)
            .unwrap_or(0.0)
    }

    pub fn volume(&self) -> f64 {
        self.measure.iter().sum()
    }

    pub fn check_vertex(&self, x: usize) -> Result<()> {
        if x < self.n() {
            Ok(())
        } else {
            Err(Error::Argument(format!(
                "vertex {x} out of range for {} vertices",
                self.n()
            )))
        }
    }

    pub fn check_len(&self, f: &VertexFunction) -> Result<()> {
        if f.len() == self.n() {
            Ok(())
        } else {
            Err(Error::SizeMismatch {
                expected: self.n(),
                got: f.len(),
            })
        }
    }

    pub fn is_connected(&self) -> bool {
        hop_distances(&self.adjacency, 0).iter().all(Option::is_some)
    }

    pub fn eccentricity(&self, x0: usize) -> Result<usize> {
        let d = graph_distance(self, x0)?;
        Ok(d.into_iter().max().unwrap_or(0))
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
    mu: Vec<f64>,
}

fn hop_distances(adjacency: &[Vec<(usize, f64)>], x0: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adjacency.len()];
    let mut queue = VecDeque::new();
    dist[x0] = Some(0);
    queue.push_back(x0);
    while let Some(x) = queue.pop_front() {
        let next = dist[x].unwrap() + 1;
        for &(y, _) in &adjacency[x] {
            if dist[y].is_none() {
                dist[y] = Some(next);
                queue.push_back(y);
            }
        }
    }
    dist
}

/// `Σ_x μ(x) f(x)`, summed in ascending vertex order.
pub fn integrate(graph: &WeightedGraph, f: &VertexFunction) -> Result<f64> {
    graph.check_len(f)?;
    Ok(weighted_sum(graph, f.as_slice()))
}

pub(crate) fn weighted_sum(graph: &WeightedGraph, f: &[f64]) -> f64 {
    graph
        .measure
        .iter()
        .zip(f)
        .fold(0.0, |acc, (m, v)| acc + m * v)
}

/// `(Σ_x μ(x)|f(x)|^q)^{1/q}` for `q >= 1`.
pub fn lq_norm(graph: &WeightedGraph, f: &VertexFunction, q: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::Argument(format!("L^q norm needs q >= 1 (got {q})")));
    }
    graph.check_len(f)?;
    let sum = graph
        .measure
        .iter()
        .zip(f)
        .fold(0.0, |acc, (m, v)| acc + m * v.abs().powf(q));
    Ok(sum.powf(1.0 / q))
}

/// Hop-count distance from `x0` to every vertex.
pub fn graph_distance(graph: &WeightedGraph, x0: usize) -> Result<Vec<usize>> {
    graph.check_vertex(x0)?;
    hop_distances(&graph.adjacency, x0)
        .into_iter()
        .map(|d| d.ok_or_else(|| Error::Graph("graph is not connected".into())))
        .collect()
}

/// Base vertex, radius and tail tolerance of a finite exhaustion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    pub x0: usize,
    pub radius: usize,
    pub epsilon: f64,
}

impl TruncationSpec {
    pub fn new(x0: usize, radius: usize, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Argument(format!("tail tolerance must be positive (got {epsilon})")));
        }
        Ok(TruncationSpec { x0, radius, epsilon })
    }
}

/// Induced subgraph on a hop ball, with the maps between old and new indices.
/// Functions on the ball are implicitly zero outside it.
///
/// The induced subgraph alone forgets the edges to the zero exterior. Their
/// energy `Σ_{y outside} ω_xy |u(x)|^p` is kept in `boundary_weight`, and
/// [`ProblemSpec::on_ball`](crate::functionals::ProblemSpec::on_ball) folds it
/// into the potential so that `J` on the ball is the energy of the zero
/// extension.
#[derive(Debug, Clone)]
pub struct Ball {
    pub graph: WeightedGraph,
    /// `Σ_{y outside} ω_xy` for each ball vertex `x`.
    pub boundary_weight: Vec<f64>,
    /// `new_index[old]` is the index in the ball, if the vertex survived.
    pub new_index: Vec<Option<usize>>,
    /// `old_index[new]` is the index in the original graph.
    pub old_index: Vec<usize>,
}

impl Ball {
    pub fn restrict(&self, f: &VertexFunction) -> Result<VertexFunction> {
        if f.len() != self.new_index.len() {
            return Err(Error::SizeMismatch {
                expected: self.new_index.len(),
                got: f.len(),
            });
        }
        Ok(VertexFunction::from_raw(
            self.old_index.iter().map(|&x| f[x]).collect(),
        ))
    }

    /// Zero extension back to the original vertex set.
    pub fn extend(&self, f: &VertexFunction) -> Result<VertexFunction> {
        self.graph.check_len(f)?;
        let mut out = vec![0.0; self.new_index.len()];
        for (new, &old) in self.old_index.iter().enumerate() {
            out[old] = f[new];
        }
        Ok(VertexFunction::from_raw(out))
    }
}

/// Induced subgraph on `{x : dist(x, x0) <= R}`. Edges leaving the ball are
/// dropped from the graph and summed into `boundary_weight`. Surviving
/// vertices keep their relative order.
pub fn truncate_ball(graph: &WeightedGraph, spec: &TruncationSpec) -> Result<Ball> {
    let dist = graph_distance(graph, spec.x0)?;
    let mut new_index = vec![None; graph.n()];
    let mut old_index = Vec::new();
    for (x, &d) in dist.iter().enumerate() {
        if d <= spec.radius {
            new_index[x] = Some(old_index.len());
            old_index.push(x);
        }
    }
    let edges: Vec<_> = graph
        .edges()
        .filter_map(|(x, y, w)| Some((new_index[x]?, new_index[y]?, w)))
        .collect();
    let mut boundary_weight = vec![0.0; old_index.len()];
    for (x, y, w) in graph.edges() {
        match (new_index[x], new_index[y]) {
            (Some(a), None) => boundary_weight[a] += w,
            (None, Some(b)) => boundary_weight[b] += w,
            _ => {}
        }
    }
    let measure = old_index.iter().map(|&x| graph.measure[x]).collect();
    // a hop ball is connected through its BFS tree
    let sub = WeightedGraph::from_edges_unchecked_connectivity(old_index.len(), &edges, measure)?;
    Ok(Ball {
        graph: sub,
        boundary_weight,
        new_index,
        old_index,
    })
}

/// Deterministic graph families. Vertices are numbered in breadth-first
/// order from the natural base vertex (index 0), so a hop ball around
/// vertex 0 is an index prefix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphFamily {
    Path { n: usize },
    Cycle { n: usize },
    /// `Z^d` points with `|x|_1 <= radius`, nearest-neighbour edges.
    LatticeZdBall { dim: usize, radius: usize },
    /// Rooted tree, every internal vertex has `branching` children.
    TreeBall { branching: usize, depth: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorOptions {
    pub weight: f64,
    pub measure: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions {
            weight: 1.0,
            measure: 1.0,
        }
    }
}

pub fn generate(family: GraphFamily, opts: GeneratorOptions) -> Result<WeightedGraph> {
    let (n, edges): (usize, Vec<(usize, usize)>) = match family {
        GraphFamily::Path { n } => {
            if n < 1 {
                return Err(Error::Argument("path needs at least one vertex".into()));
            }
            (n, (1..n).map(|i| (i - 1, i)).collect())
        }
        GraphFamily::Cycle { n } => {
            if n < 3 {
                return Err(Error::Argument(format!("cycle needs at least 3 vertices (got {n})")));
            }
            let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
            edges.push((0, n - 1));
            (n, edges)
        }
        GraphFamily::LatticeZdBall { dim, radius } => lattice_ball(dim, radius)?,
        GraphFamily::TreeBall { branching, depth } => {
            if branching < 2 {
                return Err(Error::Argument(format!("tree branching must be >= 2 (got {branching})")));
            }
            let mut edges = Vec::new();
            let mut level_start = 0;
            let mut level_len = 1;
            let mut n = 1;
            for _ in 0..depth {
                for parent in level_start..level_start + level_len {
                    for _ in 0..branching {
                        edges.push((parent, n));
                        n += 1;
                    }
                }
                level_start += level_len;
                level_len *= branching;
            }
            (n, edges)
        }
    };
    let weighted: Vec<_> = edges.into_iter().map(|(x, y)| (x, y, opts.weight)).collect();
    WeightedGraph::from_edges(n, &weighted, vec![opts.measure; n])
}

fn lattice_ball(dim: usize, radius: usize) -> Result<(usize, Vec<(usize, usize)>)> {
    if dim < 1 {
        return Err(Error::Argument("lattice dimension must be >= 1".into()));
    }
    let r = radius as i64;
    let mut points: Vec<Vec<i64>> = vec![vec![]];
    for _ in 0..dim {
        points = points
            .into_iter()
            .flat_map(|p| {
                let used: i64 = p.iter().map(|c| c.abs()).sum();
                (-(r - used)..=(r - used)).map(move |c| {
                    let mut q = p.clone();
                    q.push(c);
                    q
                })
            })
            .collect();
    }
    let l1 = |p: &Vec<i64>| p.iter().map(|c| c.abs()).sum::<i64>();
    points.sort_by(|a, b| l1(a).cmp(&l1(b)).then_with(|| a.cmp(b)));
    let index: HashMap<&[i64], usize> = points
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_slice(), i))
        .collect();
    let mut edges = Vec::new();
    for (i, p) in points.iter().enumerate() {
        for axis in 0..dim {
            let mut q = p.clone();
            q[axis] += 1;
            if let Some(&j) = index.get(q.as_slice()) {
                edges.push((i.min(j), i.max(j)));
            }
        }
    }
    edges.sort_unstable();
    Ok((points.len(), edges))
}
