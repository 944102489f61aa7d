mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "irand", version, about = "Causal effects on two-point panels without a control group")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic two-point panel drawn from summary statistics
    Synth(Invocation),
    /// Estimate a treatment effect from a panel file
    Estimate(Invocation),
    /// Split a treatment effect into direct and mediated parts
    Mediate(Invocation),
    /// Compare estimator MSE over a grid of sample sizes and noise levels
    Bench(Invocation),
}

#[derive(clap::Args)]
struct Invocation {
    /// TOML file with any of the flags below; flags take precedence
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    flags: RunConfig,
}

impl Invocation {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let base = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        Ok(base.overlay(&self.flags))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Synth(inv) => {
            let (out, side) = commands::synth(&inv.resolve()?)?;
            commands::write_stdout(&out.body)?;
            if !side.is_empty() {
                eprint!("{side}");
            }
        }
        Command::Estimate(inv) => commands::write_stdout(&commands::estimate(&inv.resolve()?)?.body)?,
        Command::Mediate(inv) => commands::write_stdout(&commands::mediate(&inv.resolve()?)?.body)?,
        Command::Bench(inv) => commands::write_stdout(&commands::bench(&inv.resolve()?)?.body)?,
    }
    Ok(())
}

fn fail(err: CliError) -> ExitCode {
    eprintln!("{}", serde_json::to_string(&err.to_json()).expect("error serializes"));
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return fail(CliError::Usage(e.to_string().trim().to_string()));
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
