mod check;
mod common;
mod gen;
mod query;
mod run;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use common::{CliError, Output};

#[derive(Debug, Parser)]
#[command(name = "causal-fields", version, about = "Causal orders, slice categories and causal field theories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a causal order as JSON.
    Gen(gen::GenArgs),
    /// Query order-theoretic structure.
    Query(query::QueryArgs),
    /// Run a law-checking suite and print its report.
    Check(check::CheckArgs),
    /// Evolve a causal cellular automaton leaf by leaf.
    Run(run::RunArgs),
    /// Export an order as DOT or a run as CSV.
    Export(gen::ExportArgs),
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("CAUSAL_FIELDS_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Usage(format!("CAUSAL_FIELDS_THREADS must be a positive integer, got {v:?}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<Output, CliError> {
    configure_threads()?;
    match cli.command {
        Command::Gen(a) => gen::gen(a),
        Command::Query(a) => query::query(a),
        Command::Check(a) => check::check(a),
        Command::Run(a) => run::run(a),
        Command::Export(a) => gen::export(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(out) => match out.emit() {
            Ok(()) if out.violations => ExitCode::from(1),
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
