use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand, ValueEnum};
use solidflow::simulate::Mode;

mod commands;
mod output;

#[derive(Parser)]
#[command(name = "solidflow", version, about = "Steer a rigid body in a planar potential flow by wall pulses")]
struct Cli {
    /// Worker threads for data-parallel stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Recorded in the manifest; the pipeline itself uses no randomness.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a scenario and run the invariant checks.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one scenario and write trajectory, control and manifest files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the mode given in the scenario file.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run a scenario across pulse widths or circulations.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values; may be empty.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Epsilon,
    Gamma,
}

fn parse_mode(s: &str) -> std::result::Result<Mode, String> {
    s.parse().map_err(|e: solidflow::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        if !solidflow::exec::set_threads(n) {
            eprintln!("warning: --threads ignored (sequential build or pool already running)");
        }
    }
    match cli.command {
        Command::Validate { config } => {
            let ok = commands::validate(&config)?;
            Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Command::Run { config, mode, out } => {
            let m = commands::run(&config, mode, &out, cli.seed)?;
            println!(
                "{:?}: terminal error {:.3e}, C1 deviation {:.3e}; wrote {}",
                m.mode,
                m.terminal_error,
                m.c1_deviation,
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Sweep {
            config,
            axis,
            values,
            mode,
            out,
        } => {
            let rows = commands::sweep(&config, axis, &values, mode, &out)?;
            println!("{:>10} {:>14} {:>14} {:>14}", "value", "terminal", "C1 dev", "inflow");
            for r in &rows {
                match &r.error {
                    None => println!(
                        "{:>10} {:>14.6e} {:>14.6e} {:>14.6e}",
                        r.value, r.terminal_error, r.c1_deviation, r.inflow
                    ),
                    Some(e) => println!("{:>10} failed: {e}", r.value),
                }
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
