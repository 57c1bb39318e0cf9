use std::path::PathBuf;
use std::process::ExitCode;

use advdesign_cli::commands::{run_exchange, run_optimize, run_posterior, PosteriorRequest};
use advdesign_cli::config::RunConfig;
use advdesign_cli::CliError;
use clap::{Parser, Subcommand};

/// Thread count for the rayon pool; unset means one per core.
const THREADS_ENV: &str = "ADVDESIGN_THREADS";

#[derive(Parser)]
#[command(
    name = "advdesign",
    version,
    about = "Adversarial Bayesian experimental design"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimise designs by gradient descent ascent.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Point exchange over the designs of an earlier run.
    Exchange {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        designs: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Importance-sampling posterior for a PK design.
    Posterior {
        #[arg(long)]
        designs: PathBuf,
        /// True parameters, comma separated.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        theta: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        replication: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the observation noise scale.
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "{THREADS_ENV} must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    match cli.command {
        Command::Optimize { config, seed, out } => {
            let cfg = RunConfig::load(&config)?;
            let s = run_optimize(&cfg, seed, out)?;
            eprintln!(
                "wrote {} replication(s) to {}",
                s.artifact.replications.len(),
                s.out_dir.display()
            );
        }
        Command::Exchange {
            config,
            designs,
            out,
        } => {
            let cfg = RunConfig::load(&config)?;
            let s = run_exchange(&cfg, &designs, out)?;
            for r in &s.artifact.replications {
                if let Some(ex) = &r.exchange {
                    eprintln!(
                        "replication {}: J {:.6e} -> {:.6e}, clusters {:?}",
                        r.replication, ex.j_hat_before, ex.j_hat_after, ex.cluster_counts
                    );
                }
            }
        }
        Command::Posterior {
            designs,
            theta,
            samples,
            replication,
            seed,
            sigma,
            out,
        } => {
            let post = run_posterior(&PosteriorRequest {
                designs,
                theta,
                samples,
                replication,
                seed,
                sigma,
                out,
            })?;
            if post.degenerate {
                eprintln!(
                    "warning: effective sample size {:.1} is below 10; weights are degenerate",
                    post.effective_sample_size
                );
            }
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
            ExitCode::from(e.exit_code())
        }
    }
}
