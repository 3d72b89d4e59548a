use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use drom::data::SynthSpec;
use drom::experiment::{cmd_report, cmd_run, cmd_synth, ExperimentError, RunOptions, SynthArgs};

#[derive(Parser)]
#[command(name = "drom", version, about = "Distributed robust online multi-task learning")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment config and write traces, metrics and a summary.
    Run {
        config: PathBuf,
        /// Run this single seed instead of the config's list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// `section.key=value`, repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Generate a low-rank synthetic task set on disk.
    Synth {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        rank: usize,
        #[arg(long)]
        samples: usize,
        #[arg(long, default_value_t = 0.0)]
        margin: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate the metrics files of a run directory.
    Report { dir: PathBuf },
}

fn dispatch(cmd: Cmd) -> Result<(), ExperimentError> {
    match cmd {
        Cmd::Run {
            config,
            seed,
            out,
            overrides,
        } => {
            let s = cmd_run(
                &config,
                &RunOptions {
                    seed,
                    out,
                    overrides,
                },
            )?;
            for o in &s.seeds {
                println!(
                    "seed {}: error rate {:.4}, f1 {:.4}, messages {}",
                    o.seed, o.final_error_rate, o.f1_micro, o.total_messages
                );
            }
            println!("wrote {}", s.output.display());
        }
        Cmd::Synth {
            m,
            d,
            rank,
            samples,
            margin,
            seed,
            noise,
            out,
        } => {
            let manifest = cmd_synth(&SynthArgs {
                spec: SynthSpec {
                    m,
                    d,
                    rank,
                    samples,
                    margin,
                    seed,
                },
                noise,
                out,
            })?;
            println!("wrote {}", manifest.display());
        }
        Cmd::Report { dir } => {
            let r = cmd_report(&dir)?;
            match r.regret_slope {
                Some(s) => println!("{} seeds, {} rounds, regret slope {s:.3}", r.seeds, r.rounds),
                None => println!("{} seeds, {} rounds", r.seeds, r.rounds),
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
