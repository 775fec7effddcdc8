//! Command-line driver for equilibrated-flux error estimation studies.

mod config;
mod run;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use thiserror::Error;

use config::Options;
use verify::SignFlip;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] earm::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Parser, Debug)]
#[command(name = "earm", version, about = "Equilibrated flux recovery and a posteriori error estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve, recover and estimate on a sequence of meshes.
    Run {
        #[command(flatten)]
        options: Options,
    },
    /// Run the invariant suite on small fixed meshes.
    Verify {
        #[command(flatten)]
        options: Options,
        /// Test hook: flip the orientation sign of local facet I of element K ("K,I").
        #[arg(long, hide = true, value_parser = parse_flip)]
        flip_sign: Option<SignFlip>,
    },
}

fn parse_flip(s: &str) -> Result<SignFlip, String> {
    let (k, i) = s.split_once(',').ok_or("expected K,I")?;
    Ok(SignFlip {
        element: k.trim().parse().map_err(|e| format!("{e}"))?,
        local: i.trim().parse().map_err(|e| format!("{e}"))?,
    })
}

fn init_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("EARM_THREADS") {
        let n: usize = v.parse().map_err(|_| CliError::Config(format!("EARM_THREADS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(CliError::Config("EARM_THREADS must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = init_threads().and_then(|_| match cli.command {
        Command::Run { options } => {
            let cfg = options.resolve()?;
            run::run(&cfg)?;
            println!("wrote {}", cfg.out.join("estimator.csv").display());
            Ok(true)
        }
        Command::Verify { options, flip_sign } => {
            let cfg = options.resolve()?;
            let checks = verify::verify(&cfg, flip_sign);
            verify::print_table(&checks);
            let failed: Vec<_> = checks.iter().filter(|c| !c.passed()).collect();
            for c in &failed {
                eprintln!("violation: {} / {} [{}] margin {:.3e}", c.module, c.invariant, c.case, c.margin());
            }
            Ok(failed.is_empty())
        }
    });
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
