//! `vot`: solve, measure and audit vector-valued transport problems.
//!
//! Exit codes: 0 success, 1 audit found violations, 2 invalid input,
//! 3 infeasible problem.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use vot_core::Error;

#[derive(Debug, Parser)]
#[command(name = "vot", version, about = "Vector-valued optimal transport on finite supports")]
struct Cli {
    /// Tolerance for mass checks and optimality certificates.
    #[arg(long, global = true, env = "VOT_TOL", value_name = "TOL")]
    tol: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve a problem file and report value, plan, potentials and certificates.
    Solve {
        problem: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// W_p distance between two measure files under a metric file.
    Distance {
        a: PathBuf,
        b: PathBuf,
        metric: PathBuf,
        /// Exponent; defaults to the metric file's `p`, then 1.
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a cost family on a set of points.
    Audit {
        metric: PathBuf,
        #[arg(long)]
        supports: PathBuf,
        #[arg(long, value_enum, default_value_t = AuditMode::Mti)]
        mode: AuditMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compose a plan mu -> nu with a plan nu -> lambda.
    Glue {
        plan_ab: PathBuf,
        plan_bc: PathBuf,
        nu: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Distance between two n-tuples of points, one species per point.
    Tuple {
        x: PathBuf,
        y: PathBuf,
        metric: PathBuf,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the solver on seeded random instances.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AuditMode {
    /// Mixed triangle inequalities only.
    Mti,
    /// Every distance hypothesis: symmetry, MTI, zero diagonal, positive off-diagonal.
    Metric,
}

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Ok,
    Violations,
    Infeasible,
}

fn exit_code(result: Result<Outcome, Error>) -> ExitCode {
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violations) => ExitCode::from(1),
        Ok(Outcome::Infeasible) => ExitCode::from(3),
        Err(Error::Infeasible) => {
            eprintln!("error: {}", Error::Infeasible);
            ExitCode::from(3)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let tol = commands::Tolerances::from_override(cli.tol);
    let result = match cli.command {
        Command::Solve { problem, out } => commands::solve(&problem, out.as_deref(), &tol),
        Command::Distance { a, b, metric, p, out } => {
            commands::distance(&a, &b, &metric, p, out.as_deref(), &tol)
        }
        Command::Audit {
            metric,
            supports,
            mode,
            out,
        } => commands::audit(&metric, &supports, mode == AuditMode::Metric, out.as_deref()),
        Command::Glue {
            plan_ab,
            plan_bc,
            nu,
            out,
        } => commands::glue(&plan_ab, &plan_bc, &nu, out.as_deref(), &tol),
        Command::Tuple { x, y, metric, p, out } => {
            commands::tuple(&x, &y, &metric, p, out.as_deref(), &tol)
        }
        Command::Selftest { seed, count } => commands::selftest(seed, count),
    };
    exit_code(result)
}
