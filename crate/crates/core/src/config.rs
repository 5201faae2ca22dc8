//! TOML experiment configuration.
//!
//! ```toml
//! [graph]
//! family = "lattice_zd_ball"   # path | cycle | lattice_zd_ball | tree_ball | file
//! dim = 1
//! radius = 64
//!
//! [problem]
//! p = 4.0
//! alpha = 3.0
//! delta = 0.4
//! h = "1 + dist^4"             # number, per-vertex array, or formula in dist
//! g = 1.0
//!
//! [solver]
//! grad_tol = 1e-9
//!
//! [truncation]
//! x0 = 0
//! radius = 8                   # or epsilon = 1e-3 to pick the radius from the tail
//! ```
//!
//! Formulas are sums of terms `c`, `dist`, `dist^k`, `c*dist` or `c*dist^k`,
//! where `dist` is the hop distance to the truncation base vertex.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::functionals::ProblemSpec;
use crate::graph::{generate, graph_distance, GeneratorOptions, GraphFamily, VertexFunction, WeightedGraph};
use crate::solver::{Init, SolveOptions};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub graph: GraphSection,
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub truncation: TruncationSection,
    #[serde(default)]
    pub verify: VerifySection,
    /// Directory of the config file, for resolving relative paths.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Deserialize)]
pub struct GraphSection {
    #[serde(flatten)]
    pub source: GraphSource,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default = "one")]
    pub measure: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphSource {
    Path { n: usize },
    Cycle { n: usize },
    LatticeZdBall { dim: usize, radius: usize },
    TreeBall { branching: usize, depth: usize },
    /// JSON graph file; weight and measure overrides are ignored.
    File { path: PathBuf },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    pub p: f64,
    pub alpha: f64,
    pub delta: f64,
    #[serde(default = "one")]
    pub theta: f64,
    pub h: Coefficient,
    pub g: Coefficient,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Coefficient {
    Constant(f64),
    Values(Vec<f64>),
    Formula(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub max_iters: usize,
    pub grad_tol: f64,
    pub step_init: Option<f64>,
    pub backtrack: f64,
    pub armijo: f64,
    pub seed: u64,
    pub init: InitKind,
    pub custom: Option<Vec<f64>>,
    pub bump_width: f64,
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolveOptions::default();
        SolverSection {
            max_iters: d.max_iters,
            grad_tol: d.grad_tol,
            step_init: d.step_init,
            backtrack: d.backtrack,
            armijo: d.armijo,
            seed: d.seed,
            init: InitKind::Bump,
            custom: None,
            bump_width: d.bump_width,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Bump,
    Uniform,
    Custom,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationSection {
    pub x0: usize,
    pub radius: Option<usize>,
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub trials: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { trials: 1000 }
    }
}

fn one() -> f64 {
    1.0
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        config.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(config)
    }

    /// The full (untruncated) graph described by `[graph]`.
    pub fn build_graph(&self) -> Result<WeightedGraph> {
        let opts = GeneratorOptions {
            weight: self.graph.weight,
            measure: self.graph.measure,
        };
        let family = match &self.graph.source {
            GraphSource::File { path } => {
                return WeightedGraph::load_json(self.base_dir.join(path)).map_err(|e| match e {
                    Error::Io(io) => Error::Config(format!("cannot read graph file {}: {io}", path.display())),
                    other => other,
                });
            }
            GraphSource::Path { n } => GraphFamily::Path { n: *n },
            GraphSource::Cycle { n } => GraphFamily::Cycle { n: *n },
            GraphSource::LatticeZdBall { dim, radius } => GraphFamily::LatticeZdBall {
                dim: *dim,
                radius: *radius,
            },
            GraphSource::TreeBall { branching, depth } => GraphFamily::TreeBall {
                branching: *branching,
                depth: *depth,
            },
        };
        generate(family, opts)
    }

    /// Problem data evaluated on `graph`, with `dist` measured from `truncation.x0`.
    pub fn build_problem(&self, graph: &WeightedGraph) -> Result<ProblemSpec> {
        let dist = graph_distance(graph, self.truncation.x0)?;
        let p = &self.problem;
        Ok(ProblemSpec::new(
            p.p,
            p.alpha,
            p.delta,
            p.theta,
            p.h.evaluate(&dist, "h")?,
            p.g.evaluate(&dist, "g")?,
        ))
    }

    pub fn solve_options(&self) -> Result<SolveOptions> {
        let s = &self.solver;
        let init = match s.init {
            InitKind::Bump => Init::Bump,
            InitKind::Uniform => Init::Uniform,
            InitKind::Custom => Init::Custom(VertexFunction::new(s.custom.clone().ok_or_else(
                || Error::Config("init = \"custom\" needs a `custom` array".into()),
            )?)?),
        };
        let opts = SolveOptions {
            max_iters: s.max_iters,
            grad_tol: s.grad_tol,
            step_init: s.step_init,
            backtrack: s.backtrack,
            armijo: s.armijo,
            seed: s.seed,
            init,
            x0: self.truncation.x0,
            bump_width: s.bump_width,
            record_iterates: false,
        };
        opts.validate()?;
        Ok(opts)
    }
}

impl Coefficient {
    pub fn evaluate(&self, dist: &[usize], name: &str) -> Result<VertexFunction> {
        match self {
            Coefficient::Constant(c) => VertexFunction::new(vec![*c; dist.len()]),
            Coefficient::Values(v) => {
                if v.len() != dist.len() {
                    return Err(Error::Config(format!(
                        "{name} lists {} values for {} vertices",
                        v.len(),
                        dist.len()
                    )));
                }
                VertexFunction::new(v.clone())
            }
            Coefficient::Formula(text) => {
                let terms = parse_formula(text)
                    .map_err(|e| Error::Config(format!("{name} = {text:?}: {e}")))?;
                VertexFunction::new(
                    dist.iter()
                        .map(|&d| {
                            terms
                                .iter()
                                .map(|t| t.coef * (d as f64).powf(t.power))
                                .sum()
                        })
                        .collect(),
                )
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Term {
    coef: f64,
    power: f64,
}

fn parse_number(s: &str) -> std::result::Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("cannot parse number {:?}", s.trim()))
}

fn parse_formula(text: &str) -> std::result::Result<Vec<Term>, String> {
    let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    if compact.is_empty() {
        return Err("empty formula".into());
    }
    compact
        .split('+')
        .map(|term| {
            let (coef, var) = match term.split_once('*') {
                Some((c, v)) => (parse_number(c)?, v),
                None if term.starts_with("dist") => (1.0, term),
                None => return Ok(Term { coef: parse_number(term)?, power: 0.0 }),
            };
            let power = match var.strip_prefix("dist") {
                Some("") => 1.0,
                Some(rest) => match rest.strip_prefix('^') {
                    Some(k) => parse_number(k)?,
                    None => return Err(format!("unexpected {rest:?} after dist")),
                },
                None => return Err(format!("unknown variable {var:?}; only `dist` is supported")),
            };
            Ok(Term { coef, power })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formulas() {
        let dist = [0, 1, 2];
        let f = |s: &str| {
            Coefficient::Formula(s.into())
                .evaluate(&dist, "h")
                .unwrap()
                .into_vec()
        };
        assert_eq!(f("1+dist^4"), vec![1.0, 2.0, 17.0]);
        assert_eq!(f(" 2 + 0.5*dist "), vec![2.0, 2.5, 3.0]);
        assert_eq!(f("3"), vec![3.0; 3]);
        assert_eq!(f("dist + 2*dist^2"), vec![0.0, 3.0, 10.0]);
        for bad in ["", "1+x^2", "1+dist2", "a*dist"] {
            assert!(Coefficient::Formula(bad.into()).evaluate(&dist, "h").is_err(), "{bad}");
        }
        assert!(Coefficient::Values(vec![1.0]).evaluate(&dist, "g").is_err());
    }

    #[test]
    fn parses_full_config() {
        let text = r#"
            [graph]
            family = "lattice_zd_ball"
            dim = 1
            radius = 5

            [problem]
            p = 4.0
            alpha = 3.0
            delta = 0.4
            h = "1+dist^4"
            g = 1.0

            [solver]
            grad_tol = 1e-8
            init = "uniform"

            [truncation]
            radius = 2
        "#;
        let c = Config::from_toml_str(text).unwrap();
        let g = c.build_graph().unwrap();
        assert_eq!(g.n(), 11);
        let s = c.build_problem(&g).unwrap();
        assert_eq!(s.h[3], 17.0);
        assert_eq!(s.theta, 1.0);
        let o = c.solve_options().unwrap();
        assert_eq!((o.grad_tol, o.init.clone()), (1e-8, Init::Uniform));
        assert_eq!(c.truncation.radius, Some(2));
        assert_eq!(c.verify.trials, 1000);
    }

    #[test]
    fn rejects_unknown_keys_and_bad_custom_init() {
        let base = "[graph]\nfamily = \"path\"\nn = 3\n[problem]\np = 4.0\nalpha = 3.0\ndelta = 0.4\nh = 1.0\ng = 1.0\n";
        assert!(Config::from_toml_str(&format!("{base}[solver]\nbogus = 1\n")).is_err());
        let c = Config::from_toml_str(&format!("{base}[solver]\ninit = \"custom\"\n")).unwrap();
        assert!(c.solve_options().is_err());
        let c = Config::from_toml_str(&format!("{base}[solver]\ninit = \"custom\"\ncustom = [1.0, 2.0, 3.0]\n")).unwrap();
        assert!(c.solve_options().is_ok());
    }
}
