//! `levelstat <subcommand> --config <path> [--seed N] [--out DIR]`
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical convergence failure.
//! `LEVELSTAT_THREADS` sets the worker thread count.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use levelstat_core::io::{run_pipeline, AnalysisConfig, Subcommand};
use levelstat_core::Error;

#[derive(Parser, Debug)]
#[command(name = "levelstat", version, about = "Spectral statistics and enhancement-factor analysis")]
struct Cli {
    /// generate, billiard, unfold, nnsd, p2s, powerspec, eef-sim, eef-theory or full-report
    subcommand: String,
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<PathBuf, Error> {
    let subcommand: Subcommand = cli.subcommand.parse()?;
    let mut config = AnalysisConfig::from_file(&cli.config)?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let out = cli.out.unwrap_or_else(|| PathBuf::from(&config.output_dir));
    let bundle = run_pipeline(&config, subcommand)?;
    bundle.write(&out)?;
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    if let Ok(n) = std::env::var("LEVELSTAT_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    eprintln!("levelstat: could not size thread pool: {e}");
                }
            }
            _ => {
                eprintln!("levelstat: LEVELSTAT_THREADS must be a positive integer, got `{n}`");
                return ExitCode::from(2);
            }
        }
    }
    match run(cli) {
        Ok(out) => {
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("levelstat: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
