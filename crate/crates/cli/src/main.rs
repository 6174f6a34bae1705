//! `besqlab` command-line front end.

mod args;
mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::process::ExitCode;
use std::time::Instant;

use clap::{CommandFactory, Parser};
use serde::de::DeserializeOwned;
use serde::Serialize;

use args::{Cli, Command, Common, Format};
use commands::Outcome;
use error::CliError;
use output::{metadata, sidecar_path};

trait HasCommon {
    fn common(&self) -> &Common;
}

macro_rules! has_common {
    ($($t:ty),*) => {
        $(impl HasCommon for $t {
            fn common(&self) -> &Common {
                &self.common
            }
        })*
    };
}

has_common!(
    args::DensityArgs,
    args::SimulateArgs,
    args::EigenArgs,
    args::RatioArgs,
    args::LaplaceArgs,
    args::Lemma3Args,
    args::MarkovArgs
);

/// Config keys accepted by `command`: its long flags plus file-only keys.
fn allowed_keys(command: &str) -> Vec<String> {
    let cli = Cli::command();
    let mut keys: Vec<String> = cli
        .find_subcommand(command)
        .map(|c| {
            c.get_arguments()
                .filter_map(|a| a.get_long())
                .filter(|l| !matches!(*l, "config" | "help" | "version"))
                .map(str::to_string)
                .collect()
        })
        .unwrap_or_default();
    if matches!(command, "markov-test" | "cmx-test") {
        keys.extend(["cells".to_string(), "budget".to_string()]);
    }
    keys
}

fn execute<T, F>(command: &str, flags: &T, stochastic: bool, run: F) -> Result<(), CliError>
where
    T: Serialize + DeserializeOwned + HasCommon,
    F: FnOnce(&T, Option<u64>) -> Result<Outcome, CliError>,
{
    let start = Instant::now();
    let (args, merged) = config::merge(
        flags,
        flags.common().config.as_deref(),
        command,
        &allowed_keys(command),
    )?;
    let common = args.common().clone();
    if stochastic && common.seed.is_none() {
        return error::config_err(format!("`{command}` is stochastic and needs --seed"));
    }
    let outcome = run(&args, common.seed)?;
    let format = common.format.unwrap_or(Format::Csv);
    let bytes = outcome.artifact.render(format)?;
    match &common.output {
        Some(path) => {
            std::fs::write(path, &bytes)?;
            let meta = metadata(command, &merged, common.seed, start.elapsed());
            let mut text = serde_json::to_vec_pretty(&meta).map_err(std::io::Error::other)?;
            text.push(b'\n');
            std::fs::write(sidecar_path(path), text)?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            match (format, outcome.artifact.scalar()) {
                (Format::Csv, Some(v)) => writeln!(out, "{v:?}")?,
                _ => out.write_all(&bytes)?,
            }
        }
    }
    match outcome.inconclusive {
        Some(msg) => Err(CliError::Inconclusive(msg)),
        None => Ok(()),
    }
}

fn seed_of(seed: Option<u64>) -> u64 {
    // only reached for stochastic commands, where `execute` checked it
    seed.unwrap_or_default()
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let name = cli.command.name();
    match &cli.command {
        Command::Density(a) => execute(name, a, false, |a, _| commands::density(a)),
        Command::Simulate(a) => execute(name, a, true, |a, s| commands::simulate(a, seed_of(s))),
        Command::Eigen(a) => execute(name, a, true, |a, s| commands::eigen(a, seed_of(s))),
        Command::Ratio(a) => execute(name, a, false, |a, _| commands::ratio(a)),
        Command::Laplace(a) => execute(name, a, false, |a, _| commands::laplace(a)),
        Command::Lemma3(a) => execute(name, a, false, |a, _| commands::lemma3(a)),
        Command::MarkovTest(a) => execute(name, a, true, |a, s| commands::markov(a, "besq-sum", seed_of(s))),
        Command::CmxTest(a) => execute(name, a, true, |a, s| commands::markov(a, "cmx", seed_of(s))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // help and version are successes; every parse failure is a config error
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("besqlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
