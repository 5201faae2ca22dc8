//! `yamabe solve | sweep | verify`. Set `YAMABE_LOG` (e.g. `info`, `debug`) for logs.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use yamabe_core::commands::{cmd_solve, cmd_sweep, cmd_verify, parse_radii, Outcome, EXIT_VALIDATION};

#[derive(Parser)]
#[command(name = "yamabe", version, about = "Positive solutions of p-th Yamabe type equations on weighted graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured instance; writes solution.csv and report.json.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Solve on nested balls; writes sweep.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated hop radii, e.g. 4,8,16.
        #[arg(long)]
        radii: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check the hypotheses and run the inequality suite.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("YAMABE_LOG", "warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve { config, out, seed } => cmd_solve(&config, &out, seed),
        Command::Sweep {
            config,
            radii,
            out,
            seed,
        } => match parse_radii(&radii) {
            Ok(radii) => cmd_sweep(&config, &out, &radii, seed),
            Err(err) => Outcome {
                code: EXIT_VALIDATION,
                message: err.to_string(),
                files: Vec::new(),
            },
        },
        Command::Verify {
            config,
            trials,
            out,
            seed,
        } => cmd_verify(&config, out.as_deref(), trials, seed),
    };
    if outcome.code == 0 {
        println!("{}", outcome.message.trim_end());
        for file in &outcome.files {
            println!("wrote {}", file.display());
        }
    } else {
        eprintln!("error: {}", outcome.message.trim_end());
    }
    ExitCode::from(outcome.code as u8)
}
