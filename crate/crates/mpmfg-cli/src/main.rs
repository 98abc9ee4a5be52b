use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use mpmfg_cli::config::{load_config, ExperimentConfig, Mode, ModelSpec};
use mpmfg_cli::{acceptance, runner};

#[derive(Parser)]
#[command(name = "mpmfg", version, about = "Multi-population mean-field game toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON configuration file.
    Run {
        config: PathBuf,
        /// Output directory (default: $MPMFG_OUT, then ./mpmfg_out).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker cap. Execution is serial and results are independent of
        /// this value; it is recorded in the manifest.
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Shortcut: the complete-information solve of the epidemic benchmark.
    EpidemicExact {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
    },
    /// Run the acceptance suite (prints one pass/fail line per criterion).
    Verify {
        /// Comma-separated criterion numbers to run (default: all).
        #[arg(long)]
        criteria: Option<String>,
    },
}

fn out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("MPMFG_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("mpmfg_out"))
}

fn main_inner() -> Result<bool> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            threads,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if threads == 0 {
                anyhow::bail!("--threads must be >= 1");
            }
            let dir = out_dir(out);
            let summary = runner::run(&cfg, &dir, threads)?;
            println!(
                "wrote {} (converged: {}, iterations: {})",
                summary.out_dir.display(),
                summary.converged,
                summary.iterations
            );
            Ok(true)
        }
        Command::EpidemicExact { out, seed, threads } => {
            let cfg = ExperimentConfig::minimal(Mode::Exact, ModelSpec::Epidemic, seed);
            let dir = out_dir(out);
            let summary = runner::run(&cfg, &dir, threads)?;
            println!(
                "wrote {} (converged: {}, iterations: {})",
                summary.out_dir.display(),
                summary.converged,
                summary.iterations
            );
            Ok(true)
        }
        Command::Verify { criteria } => {
            let filter: Option<Vec<usize>> = criteria.map(|s| {
                s.split(',')
                    .filter_map(|t| t.trim().parse().ok())
                    .collect()
            });
            let exe = std::env::current_exe()?;
            Ok(acceptance::run_all(filter.as_deref(), &exe))
        }
    }
}

fn main() -> ExitCode {
    match main_inner() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
