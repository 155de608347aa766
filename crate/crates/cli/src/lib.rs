//! Command-line workflow and HTTP service around `cpodem-core`.

pub mod args;
pub mod commands;
pub mod config;
pub mod frame;
pub mod service;
pub mod summary;

use std::fmt;

/// Bad invocation: a flag value that cannot be used. Exit status 1.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// `Err(UsageError)` naming the flag.
pub fn usage<T>(flag: &str, msg: impl fmt::Display) -> anyhow::Result<T> {
    Err(UsageError(format!("{flag}: {msg}")).into())
}
