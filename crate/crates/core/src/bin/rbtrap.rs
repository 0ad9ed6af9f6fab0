use std::io;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rbtrap::app::{self, AppError, FieldArgs, Pipeline, SolveArgs, SweepArgs};

#[derive(Parser)]
#[command(
    name = "rbtrap",
    version,
    about = "Rayleigh-Bloch trapped modes of a weakly perturbed periodic strip"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the dispersion relation at the configured β and print a JSON report
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also run the configured brute-force oracle
        #[arg(long)]
        with_oracle: bool,
        /// Include wall-clock timings (makes output non-reproducible)
        #[arg(long)]
        timings: bool,
        /// Write the solved point as a one-row CSV
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Trace μ(β) over a range of β
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        beta_min: f64,
        #[arg(long, allow_hyphen_values = true)]
        beta_max: f64,
        #[arg(long, default_value_t = 16)]
        steps: usize,
        /// CSV destination, stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
        /// Worker threads, 0 for all cores
        #[arg(long, env = "RBTRAP_JOBS", default_value_t = 0)]
        jobs: usize,
    },
    /// Sample Ψ(x, y) on one period and write CSV
    Field {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 201)]
        nx: usize,
        #[arg(long, default_value_t = 32)]
        ny: usize,
        #[arg(long)]
        xmax: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the self-consistency checks
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<(), AppError> {
    let mut stdout = io::stdout().lock();
    match cli.command {
        Command::Solve {
            common,
            with_oracle,
            timings,
            csv,
        } => {
            let p = Pipeline::from_path(&common.config)?;
            app::run_solve(
                &p,
                &SolveArgs {
                    oracle: with_oracle,
                    timings,
                    csv,
                },
                &mut stdout,
            )
        }
        Command::Sweep {
            common,
            beta_min,
            beta_max,
            steps,
            out,
            svg,
            jobs,
        } => {
            let p = Pipeline::from_path(&common.config)?;
            let args = SweepArgs {
                beta_min,
                beta_max,
                steps,
                jobs,
                out,
                svg,
            };
            app::run_sweep(&p, &args, &mut stdout).map(|_| ())
        }
        Command::Field {
            common,
            nx,
            ny,
            xmax,
            out,
        } => {
            let p = Pipeline::from_path(&common.config)?;
            app::run_field(&p, &FieldArgs { nx, ny, xmax, out }).map(|_| ())
        }
        Command::Validate { common } => {
            let p = Pipeline::from_path(&common.config)?;
            app::run_validate(&p, &mut stdout)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rbtrap: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
