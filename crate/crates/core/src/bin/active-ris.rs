use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use active_ris::harness::{load_config, run_experiment, ExperimentConfig, Preset};

/// Monte-Carlo experiments for sub-connected active RIS beamforming.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write results.csv, aggregate.csv and trace files.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        workers: Option<usize>,
        /// Overrides the `preset` key of the config.
        #[arg(long)]
        preset: Option<Preset>,
    },
    /// Parse and check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn describe(cfg: &ExperimentConfig) -> String {
    format!(
        "{}: {} sweep point(s) x {} architecture(s) x {} trial(s), N = {}, K = {}, M = {}, L = {}",
        cfg.preset,
        cfg.sweep.len(),
        cfg.architectures_at().len(),
        cfg.trials,
        cfg.n,
        cfg.k,
        cfg.m,
        cfg.l
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load_config(&config) {
            Ok(cfg) => {
                println!("ok: {}", describe(&cfg));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{}: {e}", config.display());
                ExitCode::from(2)
            }
        },
        Command::Run {
            config,
            trials,
            seed,
            out,
            workers,
            preset,
        } => {
            let mut cfg = match load_config(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("{}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            if let Some(p) = preset {
                cfg.preset = p;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.out = o;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Err(e) = cfg.validate() {
                eprintln!("{e}");
                return ExitCode::from(2);
            }
            eprintln!("{}", describe(&cfg));
            match run_experiment(&cfg) {
                Ok(summary) => {
                    for a in summary
                        .aggregate
                        .iter()
                        .filter(|a| a.metric == "sum_rate" || a.metric == "total_power")
                    {
                        println!(
                            "{:>10} sweep {:<12} {:<12} mean {:.6} ± {:.6} (n = {}, excluded {})",
                            a.architecture, a.sweep, a.metric, a.mean, a.std_err, a.count, a.excluded
                        );
                    }
                    println!(
                        "{} jobs, {} infeasible, {} errors, {} panicked; output in {}",
                        summary.jobs,
                        summary.infeasible,
                        summary.errors,
                        summary.panicked,
                        summary.out_dir.display()
                    );
                    for m in &summary.messages {
                        eprintln!("  {m}");
                    }
                    if summary.panicked > 0 {
                        ExitCode::FAILURE
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(e) => {
                    eprintln!("{e}");
                    ExitCode::FAILURE
                }
            }
        }
    }
}
