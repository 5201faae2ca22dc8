//! Variational solver for the p-th Yamabe type equation
//! `-Δ_p u + h|u|^{p-2}u = g u^{α-1}` (`2 < α <= p`) on weighted graphs.
//!
//! The solver minimizes the p-Dirichlet energy `J` on the level set
//! `{K = 1}` of the cut-off nonlinearity, recovers the Lagrange multiplier,
//! and rescales the minimizer into a positive solution. [`verify`] checks
//! the hypotheses and the inequalities the existence argument relies on.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod functionals;
pub mod graph;
pub mod operators;
pub mod solver;
pub mod verify;

pub use error::{Error, HypothesisViolation, Result};
pub use functionals::{
    constraint_k, energy_j, h_norm, j_gradient, k_derivative_action, k_gradient,
    kprime_lipschitz_probe, nonlinearity_g, nonlinearity_g_prime, ProblemSpec,
};
pub use graph::{
    generate, graph_distance, integrate, lq_norm, truncate_ball, Ball, GeneratorOptions,
    GraphFamily, TruncationSpec, VertexFunction, WeightedGraph,
};
pub use operators::{dirichlet_energy, ibp_identity_check, p_gradient_norm, p_laplacian};
pub use solver::{
    choose_truncation_radius, lagrange_multiplier, minimize_constrained, rescale_solution, solve,
    Init, SolveOptions, SolveResult, Stage,
};
pub use verify::{
    exhaustion_study, hypotheses_check, inequality_suite, positivity_certificate, residual_report,
};
