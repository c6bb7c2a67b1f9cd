use std::path::PathBuf;
use std::process::ExitCode;

use aseq::commands;
use aseq::{exit, AppResult};
use aseq_core::scenarios::CaseId;
use clap::{Parser, Subcommand};

/// Intersection decision making with game rewards, malice inference and
/// Q-learning.
///
/// Exit codes: 0 success, 1 other failure, 2 usage error, 3 config error,
/// 4 artifact metadata mismatch, 5 collision during evaluation.
#[derive(Parser)]
#[command(name = "aseq", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a Q-table; writes qtable.json, curve.csv and manifest.json.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Continue from an existing table (fine-tuning).
        #[arg(long)]
        init: Option<PathBuf>,
    },
    /// Run one evaluation case; writes trace.csv, metrics.json and plots.
    RunCase {
        #[arg(long)]
        case: CaseId,
        #[arg(long)]
        qtable: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Jitter the initial conditions with this seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fit the malice network to a labeled corpus (file or directory).
    FitTom {
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory, or a .json file path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a labeled corpus from scripted episodes.
    Corpus {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        episodes: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the jobs of a batch manifest in parallel.
    Batch {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Summarize an artifact file.
    Inspect { path: PathBuf },
}

fn run(cli: Cli) -> AppResult<()> {
    match cli.command {
        Command::Train { config, seed, out, init } => {
            let r = commands::train_cmd(config.as_deref(), seed, &out, init.as_deref())?;
            let last = r.curve.last().copied().unwrap_or(0.0);
            println!("trained {} episodes, {} states, final mean reward {last:.4}", r.curve.len(), r.table.len());
        }
        Command::RunCase { case, qtable, out, config, seed } => {
            let r = commands::run_case_cmd(case, qtable.as_deref(), config.as_deref(), seed, &out)?;
            let m = r.metrics;
            println!(
                "case {case}: crossing {} s, min speed {:.3} m/s, comfort {:.3}, min distance {:.3} m",
                m.crossing_time.map_or("-".into(), |t| format!("{t:.3}")),
                m.min_speed,
                m.comfort_index,
                m.min_distance
            );
        }
        Command::FitTom { corpus, out } => {
            let bn = commands::fit_tom_cmd(&corpus, &out)?;
            print!("{}", commands::network_summary(&bn));
        }
        Command::Corpus { config, seed, episodes, out } => {
            let n = commands::corpus_cmd(config.as_deref(), seed, episodes, &out)?;
            println!("wrote {n} episodes");
        }
        Command::Batch { manifest } => {
            let r = commands::batch_cmd(&manifest)?;
            print!("{}", aseq::artifacts::comparison_text(&r.summaries));
            if let Some((_, e)) = r.failures.iter().find(|(_, e)| e.exit_code() != exit::COLLISION) {
                for (i, e) in &r.failures {
                    eprintln!("job {i}: {e}");
                }
                return Err(aseq::AppError::Format {
                    path: manifest,
                    message: format!("{} job(s) failed, first: {e}", r.failures.len()),
                });
            }
            let collisions: usize = r.summaries.iter().map(|s| s.collisions).sum();
            if collisions > 0 {
                return Err(aseq::AppError::Collision(format!("{collisions} evaluation run(s) collided")));
            }
        }
        Command::Inspect { path } => print!("{}", commands::inspect(&path)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
