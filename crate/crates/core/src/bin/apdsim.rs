use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use apdsim::cli::{self, CliError, LimitsArgs, EXIT_INVALID};
use apdsim::statistics::LimitMode;
use clap::{Parser, Subcommand};

/// Linear-mode APD photodetection simulator.
#[derive(Parser)]
#[command(name = "apdsim", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config and write CSV/JSON artifacts.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate excess noise and model agreement for a charge CSV.
    Analyze {
        #[arg(long)]
        charges: PathBuf,
        #[arg(long)]
        n: f64,
        #[arg(long)]
        gain: f64,
        #[arg(long)]
        sigma: f64,
    },
    /// Print the noise budget and photodetection limit as JSON.
    Limits {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        gain: f64,
        #[arg(long)]
        qe: f64,
        /// `pulse` or `continuum_cds`
        #[arg(long, default_value = "pulse")]
        mode: String,
        #[arg(long, default_value_t = 0.0)]
        dark_e: f64,
        #[arg(long, default_value_t = 1.0)]
        f_apd: f64,
        #[arg(long, default_value_t = 0.0)]
        n: f64,
    },
    /// Run a scenario over a parameter grid; CSV to stdout or --out.
    Sweep {
        /// One of gain, n, sigma, k.
        #[arg(long)]
        param: String,
        /// start:stop:count
        #[arg(long)]
        range: String,
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(args: Args) -> Result<(), CliError> {
    let stdout = io::stdout();
    match args.command {
        Command::Simulate { config, seed, out } => {
            let res = cli::cmd_simulate(&config, seed, out.as_deref())?;
            let mut lock = stdout.lock();
            for f in res.files {
                let _ = writeln!(lock, "{}", f.display());
            }
        }
        Command::Analyze {
            charges,
            n,
            gain,
            sigma,
        } => {
            cli::cmd_analyze(&charges, n, gain, sigma, stdout.lock())?;
        }
        Command::Limits {
            sigma,
            gain,
            qe,
            mode,
            dark_e,
            f_apd,
            n,
        } => {
            let mode: LimitMode = mode
                .parse()
                .map_err(|e: apdsim::Error| CliError::invalid(e.to_string()))?;
            let args = LimitsArgs {
                sigma,
                gain,
                qe,
                mode,
                dark_e,
                f_apd,
                n,
            };
            cli::cmd_limits(&args, stdout.lock())?;
        }
        Command::Sweep {
            param,
            range,
            config,
            seed,
            out,
        } => match out {
            Some(path) => {
                let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
                cli::cmd_sweep(&param, &range, &config, seed, io::BufWriter::new(file))?;
            }
            None => {
                cli::cmd_sweep(&param, &range, &config, seed, stdout.lock())?;
            }
        },
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(EXIT_INVALID as u8);
        }
    };
    match run(args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code as u8)
        }
    }
}
