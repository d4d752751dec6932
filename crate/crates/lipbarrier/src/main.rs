use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use lipbarrier::{run, Command};

/// Barrier constructions and Lipschitz checks for minimizers with
/// nonstandard growth.
#[derive(Debug, Parser)]
#[command(name = "lipbarrier", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Debug, Subcommand)]
enum Sub {
    /// Check the growth hypotheses of every declared integrand.
    GrowthCheck(Common),
    /// Build and verify barrier pairs at the selected boundary points.
    Barrier(Common),
    /// Solve the regularized Dirichlet problem and run the discrete checks.
    Solve(Common),
    /// Run every stage and write a single verdict.
    VerifyAll(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `solver.seed`.
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, args) = match cli.command {
        Sub::GrowthCheck(a) => (Command::GrowthCheck, a),
        Sub::Barrier(a) => (Command::Barrier, a),
        Sub::Solve(a) => (Command::Solve, a),
        Sub::VerifyAll(a) => (Command::VerifyAll, a),
    };
    let outcome = run(cmd, &args.config, args.out.as_deref(), args.seed);
    if outcome.exit.code() == 0 {
        println!("{}", outcome.summary);
    } else {
        eprintln!("{} [{}]: {}", cmd.name(), outcome.exit.as_str(), outcome.summary);
    }
    ExitCode::from(outcome.exit.code() as u8)
}
