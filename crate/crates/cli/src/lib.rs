//! Command-line front end: `dist`, `exact`, `simulate`, `diagnose` and `counterexample`.

pub mod commands;
pub mod config;
pub mod error;
pub mod format;

use std::io::Write;

use clap::Parser;

pub use commands::{execute, Report, SCHEMA_VERSION};
pub use config::{Cli, RunConfig};
pub use error::CliError;

/// Parses `args`, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let (sub, flags) = cli.command.split();
    match run_config(sub, &flags) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn run_config(sub: config::SubcommandName, flags: &config::Flags) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(sub, flags)?;
    if flags.dump_config {
        return emit(None, &cfg.to_canonical_json());
    }
    let report = execute(&cfg)?;
    emit(cfg.out.as_deref(), &report.body)?;
    for note in &report.notes {
        eprintln!("{note}");
    }
    if cfg.strict && report.budget_exceeded {
        return Err(CliError::Budget(
            "one or more brackets are wider than rel_tol".into(),
        ));
    }
    Ok(())
}

fn emit(path: Option<&str>, body: &str) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Runtime(format!("write failed: {e}"));
    match path {
        Some(p) => std::fs::write(p, body).map_err(io),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes()).and_then(|_| out.flush()).map_err(io)
        }
    }
}
