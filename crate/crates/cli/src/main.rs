mod args;
mod commands;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{CliError, EXIT_USAGE};

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("UQC_THREADS") else {
        return Ok(());
    };
    let threads = value
        .trim()
        .parse::<usize>()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::usage(format!("UQC_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::usage(format!("cannot configure thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = configure_threads().and_then(|()| match &cli.command {
        Command::Bound(a) => commands::bound(a),
        Command::ProbCurve(a) => commands::prob_curve(a),
        Command::Certify(a) => commands::certify(a),
        Command::Catalysis(a) => commands::catalysis(a),
        Command::DerivativeCheck(a) => commands::derivative_check(a),
    });
    match result {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("uqc: {w}");
            }
            let mut out = std::io::stdout().lock();
            if out.write_all(outcome.stdout.as_bytes()).and_then(|()| out.flush()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("uqc: error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
