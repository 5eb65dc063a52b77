use chargecap_cli::commands::{cmd_bounds, cmd_simulate, cmd_tune, cmd_validate, Overrides};
use chargecap_cli::CliError;
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

/// Capacity-risk analysis for EV charging facilities: user-choice
/// distributions, occupancy/power confidence bounds, and Monte-Carlo
/// validation.
#[derive(Parser)]
#[command(name = "chargecap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and print a validation report.
    Validate { config: PathBuf },
    /// Compute moments and write both bound curves as CSV.
    Bounds {
        config: PathBuf,
        /// Output directory (default: scenario's, else ./out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the Monte-Carlo ensemble and write empirical-vs-bound CSVs.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the replication count.
        #[arg(long)]
        replications: Option<usize>,
    },
    /// Sweep one pricing parameter and retabulate the bounds per value.
    Tune {
        config: PathBuf,
        /// Parameter family: dsl_rate_scale or pd_omega.
        #[arg(long)]
        param: String,
        /// Comma-separated sweep values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { config } => {
            let report = cmd_validate(&config)?;
            print!("{report}");
        }
        Command::Bounds { config, out, seed } => {
            let overrides = Overrides {
                seed,
                out,
                replications: None,
            };
            let output = cmd_bounds(&config, &overrides)?;
            for f in &output.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Simulate {
            config,
            out,
            seed,
            replications,
        } => {
            let overrides = Overrides {
                seed,
                out,
                replications,
            };
            let output = cmd_simulate(&config, &overrides)?;
            for f in &output.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Tune {
            config,
            param,
            values,
            out,
            seed,
        } => {
            let overrides = Overrides {
                seed,
                out,
                replications: None,
            };
            let output = cmd_tune(&config, &param, &values, &overrides)?;
            println!("wrote {}", output.file.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
