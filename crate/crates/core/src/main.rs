use std::path::PathBuf;
use std::process::ExitCode;

use boundcert::cli::{check_file, prove_file, Output, RunConfig};
use clap::{Args, Parser, Subcommand};

/// Proves bounds on real and floating-point expressions and checks the
/// resulting certificates.
#[derive(Parser)]
#[command(name = "boundcert", version, args_conflicts_with_subcommands = true)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
    #[command(flatten)]
    prove: ProveArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Prove every goal of a script (the default).
    Prove(ProveArgs),
    /// Check a certificate file.
    Check {
        /// Certificate to check.
        cert: PathBuf,
    },
}

#[derive(Args)]
struct ProveArgs {
    /// Script to prove.
    file: Option<PathBuf>,
    /// Mantissa bits of interval endpoints.
    #[arg(long, default_value_t = boundcert::dyadic::DEFAULT_PRECISION)]
    precision: u32,
    /// Theorem applications allowed per proof attempt.
    #[arg(long, default_value_t = RunConfig::default().budget)]
    budget: usize,
    /// Maximal depth of dichotomy bisection.
    #[arg(long, default_value_t = RunConfig::default().depth)]
    depth: u32,
    /// Write the widened certificate to this file.
    #[arg(long, value_name = "PATH")]
    cert: Option<PathBuf>,
    /// Print only the answers to `?` goals.
    #[arg(long)]
    quiet: bool,
}

fn prove(a: ProveArgs) -> Output {
    let Some(file) = a.file else {
        return Output {
            stderr: "error: no input file\n".into(),
            code: 2,
            ..Output::default()
        };
    };
    let cfg = RunConfig {
        precision: a.precision,
        budget: a.budget,
        depth: a.depth,
        cert: a.cert,
        quiet: a.quiet,
    };
    prove_file(&file, &cfg)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let out = match cli.command {
        Some(Command::Prove(a)) => prove(a),
        Some(Command::Check { cert }) => check_file(&cert),
        None => prove(cli.prove),
    };
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    ExitCode::from(out.code as u8)
}
