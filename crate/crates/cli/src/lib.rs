//! The `gmle` command-line tool: `fit`, `simulate` and `verify` on top of
//! `gmle-core`.
//!
//! Exit statuses: 0 success, 1 usage error, 2 data error, 3 verification
//! failure.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod output;

use std::ffi::OsString;
use std::io::Write;

use clap::Parser;

pub use commands::Status;
pub use config::{Cli, Command, CommandKind, RunConfig};
pub use error::{CliError, Result};

/// Parse `args` (program name first) and run the selected command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> Result<Status>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(args)?;
    let (kind, opts) = match cli.command {
        Command::Fit(o) => (CommandKind::Fit, o),
        Command::Simulate(o) => (CommandKind::Simulate, o),
        Command::Verify(o) => (CommandKind::Verify, o),
    };
    let cfg = RunConfig::resolve(kind, opts)?;
    match kind {
        CommandKind::Fit => commands::cmd_fit(cfg, out, err),
        CommandKind::Simulate => commands::cmd_simulate(cfg, out, err),
        CommandKind::Verify => commands::cmd_verify(cfg, out, err),
    }
}
