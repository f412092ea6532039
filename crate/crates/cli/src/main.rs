//! `por`: drive simulations, test entropy sources, verify chains, measure
//! grinding advantage and handle curve keys.

mod config;
mod error;
mod keys;
mod rng;
mod sim;
mod verify;

use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Format, SimArgs};
use error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "por", version, about = "Proof-of-randomness consensus simulator and toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the network simulator and write the chain and metrics
    Simulate(SimArgs),
    /// Run the statistical suite on an entropy source
    Rngtest(rng::RngArgs),
    /// Validate a chain file against node keys
    Verify(verify::VerifyArgs),
    /// Compare adversary advantage with and without delay weighting
    Attack(SimArgs),
    /// Key generation, encryption and one-time-pad backup
    Keys(keys::KeysArgs),
}

impl Command {
    /// Best guess at the requested format, for rendering errors.
    fn format(&self) -> Format {
        match self {
            Command::Simulate(a) | Command::Attack(a) => a.format.unwrap_or_default(),
            Command::Rngtest(a) => a.format,
            Command::Verify(a) => a.format,
            Command::Keys(a) => a.format,
        }
    }

    /// Rendered output plus whether the command's check succeeded.
    fn execute(&self) -> CliResult<(String, bool)> {
        match self {
            Command::Simulate(a) => sim::cmd_simulate(a).map(|s| (s, true)),
            Command::Attack(a) => sim::cmd_attack(a).map(|s| (s, true)),
            Command::Rngtest(a) => rng::cmd_rngtest(a),
            Command::Verify(a) => verify::cmd_verify(a),
            Command::Keys(a) => keys::cmd_keys(a).map(|s| (s, true)),
        }
    }
}

fn main() -> ExitCode {
    // usage errors are configuration errors here, not clap's default of 2
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let format = cli.command.format();
    match cli.command.execute() {
        Ok((out, ok)) => {
            let _ = std::io::stdout().write_all(out.as_bytes());
            ExitCode::from(if ok { 0 } else { 1 })
        }
        Err(CliError { code, message }) => {
            eprintln!("error: {message}");
            if format == Format::Json {
                println!("{}", serde_json::json!({ "error": message, "exit_code": code }));
            }
            ExitCode::from(code)
        }
    }
}
