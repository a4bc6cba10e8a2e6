use std::io::Write;
use std::process::ExitCode;

use anyhow::Context;
use gmle_cli::CliError;

fn main() -> ExitCode {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let result = gmle_cli::run(std::env::args_os(), &mut out, &mut stderr.lock())
        .map_err(anyhow::Error::from)
        .and_then(|status| out.flush().context("flushing stdout").map(|()| status));
    match result {
        Ok(status) => ExitCode::from(status.exit_code()),
        Err(err) => match err.downcast_ref::<CliError>() {
            Some(e @ CliError::Args(clap_err)) => {
                let _ = clap_err.print();
                ExitCode::from(e.exit_code())
            }
            Some(e) => {
                eprintln!("error: {err:#}");
                ExitCode::from(e.exit_code())
            }
            None => {
                eprintln!("error: {err:#}");
                ExitCode::from(2)
            }
        },
    }
}
