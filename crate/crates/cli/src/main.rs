//! `bytevq` command-line front end.

mod args;
mod commands;

use std::ffi::OsString;
use std::process::ExitCode;

use bytevq_core::Error;
use clap::error::ErrorKind;
use clap::parser::ValueSource;
use clap::{ArgMatches, CommandFactory, Parser};
use serde_json::Value;

use args::Cli;

/// Failure of one invocation, classified by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, bad config or unusable paths.
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(Error::Config(_)) => 1,
            CliError::Core(Error::Numeric(_) | Error::NonDeterministic { .. }) => 3,
            CliError::Core(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let argv: Vec<OsString> = std::env::args_os().collect();
    let cli = match parse(argv) {
        Ok(cli) => cli,
        Err(Parsed::Exit(code)) => return ExitCode::from(code),
        Err(Parsed::Failed(e)) => {
            eprintln!("error: {e}");
            return ExitCode::from(e.exit_code());
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

enum Parsed {
    Exit(u8),
    Failed(CliError),
}

fn clap_exit(e: clap::Error) -> Parsed {
    let _ = e.print();
    match e.kind() {
        ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
            Parsed::Exit(if e.use_stderr() { 1 } else { 0 })
        }
        _ => Parsed::Exit(1),
    }
}

/// Parse the command line, filling flags the user did not give from the
/// `--config` file.
fn parse(argv: Vec<OsString>) -> Result<Cli, Parsed> {
    let matches = Cli::command().try_get_matches_from(&argv).map_err(clap_exit)?;
    let Some((name, sub)) = matches.subcommand() else {
        return Cli::try_parse_from(&argv).map_err(clap_exit);
    };
    let Some(path) = sub.get_one::<std::path::PathBuf>("config") else {
        return Cli::try_parse_from(&argv).map_err(clap_exit);
    };
    let injected = config_flags(name, sub, path).map_err(Parsed::Failed)?;
    let pos = argv
        .iter()
        .position(|a| a.to_str() == Some(name))
        .expect("subcommand name appears in argv");
    let mut merged: Vec<OsString> = argv[..=pos].to_vec();
    merged.extend(injected.into_iter().map(OsString::from));
    merged.extend(argv[pos + 1..].iter().cloned());
    Cli::try_parse_from(merged).map_err(clap_exit)
}

fn config_flags(subcommand: &str, given: &ArgMatches, path: &std::path::Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("--config {}: {e}", path.display())))?;
    let json: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("--config {}: malformed JSON: {e}", path.display())))?;
    let Value::Object(map) = json else {
        return Err(CliError::Usage(format!("--config {}: expected a JSON object", path.display())));
    };
    let cmd = Cli::command();
    let sub = cmd.find_subcommand(subcommand).expect("parsed subcommand exists");
    let mut out = Vec::new();
    for (key, value) in map {
        let long = key.replace('_', "-");
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long() == Some(long.as_str()))
            .filter(|a| a.get_id() != "config")
            .ok_or_else(|| {
                CliError::Usage(format!("--config {}: unknown key {key:?} for {subcommand}", path.display()))
            })?;
        if given.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        let flag = format!("--{long}");
        let scalar = |v: &Value| match v {
            Value::String(s) => Ok(s.clone()),
            Value::Number(n) => Ok(n.to_string()),
            Value::Bool(b) => Ok(b.to_string()),
            _ => Err(CliError::Usage(format!(
                "--config {}: value of {key:?} must be a string, number, boolean or list",
                path.display()
            ))),
        };
        if !arg.get_action().takes_values() {
            match value {
                Value::Bool(true) => out.push(flag),
                Value::Bool(false) => {}
                _ => {
                    return Err(CliError::Usage(format!(
                        "--config {}: {key:?} is a switch and needs true or false",
                        path.display()
                    )))
                }
            }
            continue;
        }
        let rendered = match &value {
            Value::Array(items) => items.iter().map(scalar).collect::<Result<Vec<_>, _>>()?.join(","),
            v => scalar(v)?,
        };
        out.push(flag);
        out.push(rendered);
    }
    Ok(out)
}
