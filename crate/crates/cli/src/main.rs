use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use cpodem::args::Cli;
use cpodem::{commands, UsageError};

const USAGE_EXIT: u8 = 1;
const RUNTIME_EXIT: u8 = 2;

/// `CPODEM_THREADS` caps the rayon pool used for training and prediction.
fn configure_threads() -> Result<(), UsageError> {
    let Ok(raw) = std::env::var("CPODEM_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| UsageError(format!("CPODEM_THREADS: `{raw}` is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| UsageError(format!("CPODEM_THREADS: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(USAGE_EXIT),
            };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(USAGE_EXIT);
    }
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE_EXIT)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(RUNTIME_EXIT)
        }
    }
}
