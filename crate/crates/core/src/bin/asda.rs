use std::path::PathBuf;
use std::process::ExitCode;

use asda::cli::{cmd_generate, cmd_optimize, cmd_stats, ExitStatus, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "asda", version, about = "Scene augmentation and synthetic aerial dataset generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a strategy script: pre-processing, capture, post-processing.
    Generate {
        #[arg(long)]
        script: PathBuf,
        /// Scene file or directory of scene files.
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        max_variations: Option<usize>,
        #[arg(long)]
        width: Option<u32>,
        #[arg(long)]
        height: Option<u32>,
        /// Horizontal field of view in degrees.
        #[arg(long)]
        hfov: Option<f64>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        workers: u64,
    },
    /// Run the learn / optimize / collect loop from a config file.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        /// Write the JSON-lines history here instead of the configured path.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Print diversity and op-rate statistics for a dataset.
    Stats {
        #[arg(long)]
        dataset: PathBuf,
    },
}

fn fatal(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(ExitStatus::Fatal.code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = match cli.command {
        Command::Generate { script, scenes, out, seed, max_variations, width, height, hfov, workers } => {
            let config = RunConfig { script, scenes, out, seed, max_variations, width, height, hfov, workers: workers as usize };
            match cmd_generate(&config) {
                Ok(summary) => {
                    for w in &summary.warnings {
                        eprintln!("warning: {w}");
                    }
                    println!("{summary}");
                    summary.status()
                }
                Err(e) => return fatal(e),
            }
        }
        Command::Optimize { config, history } => match cmd_optimize(&config, history.as_deref()) {
            Ok(summary) => {
                print!("{}", summary.table());
                println!("history: {}", summary.history_path.display());
                if summary.status() == ExitStatus::BudgetExhausted {
                    eprintln!("target {} not reached; best score {:.4}", summary.v_star, summary.outcome.best_record().score);
                }
                summary.status()
            }
            Err(e) => return fatal(e),
        },
        Command::Stats { dataset } => match cmd_stats(&dataset) {
            Ok(report) => {
                println!("{report}");
                ExitStatus::Success
            }
            Err(e) => return fatal(e),
        },
    };
    ExitCode::from(status.code() as u8)
}
