use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stein_cli::{cmd_evaluate, cmd_generate, cmd_sweep, load_config, CliError};

#[derive(Parser)]
#[command(name = "stein", version, about = "Stein point sequences and baselines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Only print errors.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Build a point set and write points.csv, trace.csv and manifest.toml.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seeds listed in the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Report KSD and Wasserstein distance for an existing point set.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid search over kernel parameters, scored by Wasserstein distance.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    match cli.command {
        Command::Generate { config, out, seed } => {
            let outcome = cmd_generate(&load_config(&config)?, &out, seed)?;
            for d in &outcome.dirs {
                log::info!("wrote {}", d.display());
            }
            Ok(outcome.exit_code())
        }
        Command::Evaluate { config, points, out } => {
            let report = cmd_evaluate(&load_config(&config)?, &points, &out)?;
            if !cli.quiet {
                for k in &report.ksd {
                    println!(
                        "ksd[{} alpha={} beta={}] = {}",
                        k.kernel.family().name(),
                        k.kernel.alpha(),
                        k.kernel.beta(),
                        k.ksd
                    );
                }
                println!("wasserstein = {}", report.wasserstein);
            }
            Ok(0)
        }
        Command::Sweep { config, out, seed } => {
            let (rows, best) = cmd_sweep(&load_config(&config)?, &out, seed)?;
            if !cli.quiet {
                if let Some(r) = best.map(|i| &rows[i]) {
                    println!(
                        "best: alpha={} beta={} seed={} wasserstein={} ksd={}",
                        r.alpha, r.beta, r.seed, r.wasserstein, r.ksd
                    );
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
