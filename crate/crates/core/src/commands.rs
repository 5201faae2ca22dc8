//! The `solve`, `sweep` and `verify` commands behind the CLI.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 validation failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use log::{error, info};
use serde_json::{json, Value};

use crate::config::Config;
use crate::error::{Error, Result};
use crate::functionals::ProblemSpec;
use crate::graph::{truncate_ball, Ball, TruncationSpec, WeightedGraph};
use crate::solver::{choose_truncation_radius, k_tail_bound, solve, tail_profile, SolveOptions};
use crate::verify::{exhaustion_study, hypotheses_check, inequality_suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_NUMERICAL: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub code: i32,
    pub message: String,
    pub files: Vec<PathBuf>,
}

impl Outcome {
    fn failure(err: &Error) -> Self {
        let code = if err.is_validation() {
            EXIT_VALIDATION
        } else {
            EXIT_NUMERICAL
        };
        Outcome {
            code,
            message: err.to_string(),
            files: Vec::new(),
        }
    }
}

/// 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_radii(text: &str) -> Result<Vec<usize>> {
    let radii = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Argument(format!("cannot parse radius {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if radii.is_empty() {
        return Err(Error::Argument("radius list is empty".into()));
    }
    Ok(radii)
}

struct Prepared {
    config: Config,
    full: WeightedGraph,
    full_spec: ProblemSpec,
    ball: Ball,
    spec: ProblemSpec,
    opts: SolveOptions,
    tail: Option<f64>,
}

fn prepare(config_path: &Path, seed: Option<u64>) -> Result<Prepared> {
    let config = Config::load(config_path)?;
    let full = config.build_graph()?;
    let full_spec = config.build_problem(&full)?;
    let mut opts = config.solve_options()?;
    if let Some(seed) = seed {
        opts.seed = seed;
    }
    let x0 = config.truncation.x0;
    let (radius, tail) = match (config.truncation.radius, config.truncation.epsilon) {
        (Some(r), _) => {
            let tails = tail_profile(&full, &full_spec, x0)?;
            (r, Some(tails[r.min(tails.len() - 1)]))
        }
        (None, Some(eps)) => {
            let choice = choose_truncation_radius(&full, &full_spec, x0, eps, 0.0, None)?;
            (choice.radius, Some(choice.tail))
        }
        (None, None) => (full.eccentricity(x0)?, None),
    };
    let ball = truncate_ball(&full, &TruncationSpec::new(x0, radius, 1.0)?)?;
    let spec = full_spec.on_ball(&ball)?;
    opts.x0 = ball.new_index[x0].expect("centre lies in its ball");
    Ok(Prepared {
        config,
        full,
        full_spec,
        ball,
        spec,
        opts,
        tail,
    })
}

fn write(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, contents)?;
    files.push(path);
    Ok(())
}

fn problem_json(spec: &ProblemSpec) -> Value {
    json!({ "p": spec.p, "alpha": spec.alpha, "delta": spec.delta, "theta": spec.theta })
}

/// Solves the configured instance and writes `solution.csv` and `report.json`.
pub fn cmd_solve(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Outcome {
    match run_solve(config_path, out_dir, seed) {
        Ok(outcome) => outcome,
        Err(err) => {
            error!("solve failed: {err}");
            let mut outcome = Outcome::failure(&err);
            let partial = json!({ "status": "failed", "error": err.to_string() });
            if fs::create_dir_all(out_dir).is_ok() {
                let text = serde_json::to_string_pretty(&partial).expect("json");
                let _ = write(out_dir.join("report.json"), &text, &mut outcome.files);
            }
            outcome
        }
    }
}

fn run_solve(config_path: &Path, out_dir: &Path, seed: Option<u64>) -> Result<Outcome> {
    let prep = prepare(config_path, seed)?;
    let (graph, spec, opts) = (&prep.ball.graph, &prep.spec, &prep.opts);
    let hypotheses = hypotheses_check(graph, spec)?;
    let result = solve(graph, spec, opts)?;
    let inequalities = inequality_suite(graph, spec, prep.config.verify.trials, opts.seed)?;
    info!(
        "gamma = {:e}, lambda = {:e}, residual = {:e}",
        result.gamma, result.lambda, result.residual.sup
    );

    let truncation = prep.tail.map(|tail| {
        json!({
            "x0": prep.config.truncation.x0,
            "vertices": graph.n(),
            "tail": tail,
            "k_tail_bound": k_tail_bound(&prep.full, &prep.full_spec, tail, result.gamma),
        })
    });
    let mut notes = Vec::new();
    if spec.p == spec.alpha && !result.eigen_factor_is_one {
        notes.push(format!(
            "p = alpha: the eigen-factor Lambda = lambda*alpha*theta/p = {} differs from 1; \
             choosing theta = 1/lambda does not remove it because theta*lambda = p*gamma_1/alpha \
             for every theta, so u solves -Delta_p u + h u^(p-1) = Lambda g u^(p-1)",
            result.eigen_factor
        ));
    }
    if !result.positivity.pass {
        notes.push("solution is not strictly positive".into());
    }
    let status = if result.success { "success" } else { "failed" };
    let report = json!({
        "status": status,
        "seed": opts.seed,
        "graph": { "vertices": prep.full.n(), "edges": prep.full.edge_count() },
        "problem": problem_json(spec),
        "truncation": truncation,
        "hypotheses": hypotheses,
        "gamma": result.gamma,
        "lambda": result.lambda,
        "multiplier": result.multiplier,
        "theta": result.theta_used,
        "scale": result.scale,
        "eigen_factor": result.eigen_factor,
        "eigen_factor_is_one": result.eigen_factor_is_one,
        "constraint": result.constraint,
        "residual": {
            "sup": result.residual.sup,
            "l2": result.residual.l2,
            "argmax": prep.ball.old_index[result.residual.argmax],
        },
        "positivity": result.positivity,
        "stationarity": result.stationarity,
        "iterations": result.iters,
        "converged": result.converged,
        "inequalities": inequalities,
        "notes": notes,
    });

    fs::create_dir_all(out_dir)?;
    let mut files = Vec::new();
    let mut csv = String::from("vertex,u,residual\n");
    for (new, &old) in prep.ball.old_index.iter().enumerate() {
        writeln!(
            csv,
            "{old},{},{}",
            fmt_float(result.u[new]),
            fmt_float(result.residual.residual[new])
        )
        .expect("string write");
    }
    write(out_dir.join("solution.csv"), &csv, &mut files)?;
    let text = serde_json::to_string_pretty(&report)?;
    write(out_dir.join("report.json"), &text, &mut files)?;

    let code = if result.success { EXIT_OK } else { EXIT_NUMERICAL };
    Ok(Outcome {
        code,
        message: format!(
            "{status}: gamma = {}, lambda = {}, residual = {}",
            fmt_float(result.gamma),
            fmt_float(result.lambda),
            fmt_float(result.residual.sup)
        ),
        files,
    })
}

/// Runs an exhaustion study over `radii` and writes `sweep.csv`.
pub fn cmd_sweep(config_path: &Path, out_dir: &Path, radii: &[usize], seed: Option<u64>) -> Outcome {
    let run = || -> Result<Outcome> {
        if radii.is_empty() {
            return Err(Error::Argument("radius list is empty".into()));
        }
        let prep = prepare(config_path, seed)?;
        let x0 = prep.config.truncation.x0;
        let opts = SolveOptions {
            x0,
            ..prep.opts.clone()
        };
        let table = exhaustion_study(&prep.full, &prep.full_spec, x0, radii, &opts)?;
        let mut csv = String::from("R,gamma,lambda,tail_bound,converged\n");
        for row in &table.rows {
            writeln!(
                csv,
                "{},{},{},{},{}",
                row.radius,
                fmt_float(row.gamma),
                fmt_float(row.lambda),
                fmt_float(row.tail_bound),
                row.converged
            )
            .expect("string write");
        }
        fs::create_dir_all(out_dir)?;
        let mut files = Vec::new();
        write(out_dir.join("sweep.csv"), &csv, &mut files)?;
        let all_converged = table.rows.iter().all(|r| r.converged);
        let ok = table.monotone && all_converged;
        Ok(Outcome {
            code: if ok { EXIT_OK } else { EXIT_NUMERICAL },
            message: format!(
                "{} radii, monotone = {}, converged = {all_converged}",
                table.rows.len(),
                table.monotone
            ),
            files,
        })
    };
    run().unwrap_or_else(|err| {
        error!("sweep failed: {err}");
        Outcome::failure(&err)
    })
}

/// Checks the hypotheses and runs the inequality suite; writes `verify.json`
/// when `out_dir` is given.
pub fn cmd_verify(config_path: &Path, out_dir: Option<&Path>, trials: Option<usize>, seed: Option<u64>) -> Outcome {
    let run = || -> Result<Outcome> {
        let prep = prepare(config_path, seed)?;
        let (graph, spec) = (&prep.ball.graph, &prep.spec);
        let hypotheses = hypotheses_check(graph, spec)?;
        let trials = trials.unwrap_or(prep.config.verify.trials);
        let suite = inequality_suite(graph, spec, trials, prep.opts.seed)?;
        let mut files = Vec::new();
        if let Some(dir) = out_dir {
            fs::create_dir_all(dir)?;
            let report = json!({
                "problem": problem_json(spec),
                "hypotheses": hypotheses,
                "inequalities": suite,
            });
            write(dir.join("verify.json"), &serde_json::to_string_pretty(&report)?, &mut files)?;
        }
        let mut message = String::new();
        for r in &suite.results {
            writeln!(
                message,
                "{:<18} draws = {:>6}  violations = {}  max ratio = {}",
                r.name,
                r.draws,
                r.violations,
                fmt_float(r.max_ratio)
            )
            .expect("string write");
        }
        Ok(Outcome {
            code: if suite.pass { EXIT_OK } else { EXIT_NUMERICAL },
            message,
            files,
        })
    };
    run().unwrap_or_else(|err| {
        error!("verify failed: {err}");
        Outcome::failure(&err)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radii_parsing() {
        assert_eq!(parse_radii("4, 8,16").unwrap(), vec![4, 8, 16]);
        assert!(parse_radii("").is_err());
        assert!(parse_radii("4,x").is_err());
    }

    #[test]
    fn float_format_has_17_digits() {
        assert_eq!(fmt_float(1.0 / 3.0), "3.3333333333333331e-1");
        assert_eq!(fmt_float(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
