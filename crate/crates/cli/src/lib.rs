//! Command-line front end: JSON run configurations in, CSV and JSON reports out.

// `!(x > 0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use serde_json::Value;

pub use commands::Context;
pub use config::RunConfig;
pub use error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "DELAYHOPF_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eig,
    Steady,
    Hopf,
    Simulate,
    Scan,
}

/// Loads the configuration, resolves the output directory
/// (`--out`, then the config, then `DELAYHOPF_OUT`) and runs `cmd`.
pub fn run(
    cmd: Command,
    config: &std::path::Path,
    out: Option<PathBuf>,
    dense_oracle: bool,
) -> Result<Value, CliError> {
    let config = RunConfig::load(config)?;
    let out_dir = commands::output_dir(out.as_deref(), &config);
    let ctx = Context { config, out_dir, dense_oracle };
    match cmd {
        Command::Eig => commands::eig(&ctx),
        Command::Steady => commands::steady(&ctx),
        Command::Hopf => commands::hopf(&ctx),
        Command::Simulate => commands::simulate_cmd(&ctx),
        Command::Scan => commands::scan(&ctx),
    }
}
