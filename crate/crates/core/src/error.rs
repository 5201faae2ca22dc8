use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Hypotheses an instance must satisfy before the solver will run.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum HypothesisViolation {
    #[error("p must be at least 2 (got {0})")]
    PBelowTwo(f64),
    #[error("alpha must exceed 2 (got {0})")]
    AlphaNotAboveTwo(f64),
    #[error("alpha must not exceed p (alpha = {alpha}, p = {p})")]
    AlphaAboveP { alpha: f64, p: f64 },
    #[error("delta must lie in (0, 1/(p-2)) (delta = {delta}, upper = {upper})")]
    DeltaOutOfRange { delta: f64, upper: f64 },
    #[error("theta must be positive (got {0})")]
    ThetaNotPositive(f64),
    #[error("inf h must be positive (min h = {min} at vertex {vertex})")]
    HNotPositive { min: f64, vertex: usize },
    #[error("inf h*mu must be positive (min h*mu = {min} at vertex {vertex})")]
    HMuNotPositive { min: f64, vertex: usize },
    #[error("g must be nonnegative (g = {value} at vertex {vertex})")]
    GNegative { value: f64, vertex: usize },
    #[error("coefficient {name} has a non-finite entry at vertex {vertex}")]
    NonFiniteCoefficient { name: &'static str, vertex: usize },
    #[error("h^-delta is not integrable: (sum mu h^-delta)^delta = {0}")]
    HInverseNotIntegrable(f64),
    #[error("graph is not connected")]
    Disconnected,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("size mismatch: expected {expected} values, got {got}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("hypothesis violated: {0}")]
    Hypothesis(#[from] HypothesisViolation),
    #[error("internal consistency check failed: {0}")]
    Consistency(String),
    #[error("infeasible constraint: K(u) = 0 for every admissible u (g vanishes on the graph)")]
    InfeasibleConstraint,
    #[error("degenerate constraint: integral of g*u^alpha is {0}")]
    DegenerateConstraint(f64),
    #[error("truncation bound unattainable: tail {achieved} at radius {radius} exceeds epsilon {epsilon}")]
    TruncationUnattainable {
        radius: usize,
        achieved: f64,
        epsilon: f64,
    },
    #[error("solve at radius {radius} failed: {source}")]
    AtRadius {
        radius: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Validation failures (bad input) as opposed to numerical failures.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Argument(_)
            | Error::SizeMismatch { .. }
            | Error::Graph(_)
            | Error::Hypothesis(_)
            | Error::Config(_)
            | Error::Json(_) => true,
            Error::AtRadius { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}
