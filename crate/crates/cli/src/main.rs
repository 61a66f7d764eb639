//! Entry point: parse, dispatch, and map the library's error taxonomy onto
//! process exit codes (0 success, 2 usage/validation, 3 numerical failure,
//! 4 I/O; the argument parser exits 2 on its own).

mod args;
mod commands;
mod input;
mod manifest;
mod svg;

use clap::Parser;
use ridgecond::Error;

fn main() {
    let cli = args::Cli::parse();
    let result = match &cli.command {
        args::Command::Cnplot(a) => commands::cnplot::run(a),
        args::Command::Select(a) => commands::select::run(a),
        args::Command::Estimate(a) => commands::estimate::run(a),
        args::Command::Bench(a) => commands::bench::run(a),
    };
    if let Err(err) = result {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_)
        | Error::PenaltyOutOfDomain { .. }
        | Error::SingularTarget(_)
        | Error::TargetNotPD
        | Error::DegenerateVariance { .. } => 2,
        Error::NotPositiveSemiDefinite { .. }
        | Error::NumericalFailure(_)
        | Error::NearSingular { .. }
        | Error::ConvergenceFailure { .. } => 3,
        Error::ParseError { .. } | Error::MissingData { .. } | Error::Io(_) => 4,
    }
}
