//! `erasure`: train, unlearn, evaluate and tabulate from the command line.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 I/O or file
//! format error, 4 numeric failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use erasure_core::audio::SynthSpec;
use erasure_core::checkpoint::CheckpointError;
use erasure_core::experiment::{self, DatasetSource, ExperimentConfig, Method};
use erasure_core::{Error, ForgetSet};

#[derive(Parser)]
#[command(name = "erasure", version, about = "Class-level unlearning experiments for audio classifiers")]
struct Cli {
    /// Experiment config (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides every seed in the config except the dataset's.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the forget set, e.g. `0,4`.
    #[arg(long, global = true)]
    forget: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the original model and write its checkpoint and report.
    Train,
    /// Unlearn the forget set from `<out>/original.ckpt`.
    Unlearn {
        #[arg(long, default_value = "qp")]
        method: String,
        /// Skip a pipeline phase (qp only); repeatable.
        #[arg(long)]
        ablation: Vec<String>,
        /// Original checkpoint to start from.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the held-out split.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Original model's report; enables PER and deltas.
        #[arg(long)]
        original_report: Option<PathBuf>,
    },
    /// Apply the configured forget requests one after another.
    Sequential,
    /// Run the ablation grid.
    Ablation,
    /// Write the synthetic corpus as WAV files plus labels.csv.
    Synth,
    /// Build a table from report JSON files.
    Report {
        #[arg(required = true)]
        reports: Vec<PathBuf>,
    },
    /// Run the scenario named in the config end to end.
    Run,
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config(_) | Error::Shape(_) | Error::InvalidClass { .. } | Error::Manifest(_) | Error::Json(_) => 2,
        Error::NonFinite(_) => 4,
        Error::Checkpoint(CheckpointError::Shape(_)) => 2,
        Error::Io(_) | Error::Csv(_) | Error::Wav { .. } | Error::Checkpoint(_) | Error::File { .. } => 3,
    }
}

fn print_json(value: &impl serde::Serialize) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    if let Some(out) = cli.out {
        cfg.output_dir = out;
    }
    if let Some(f) = &cli.forget {
        cfg.unlearn.forget_set = ForgetSet::parse(f)?;
    }

    match cli.command {
        Command::Train => {
            let out = experiment::cmd_train(&cfg)?;
            print_json(&out.report)?;
        }
        Command::Unlearn { method, ablation, model } => {
            let method = Method::parse(&method)?;
            if !ablation.is_empty() && method != Method::Qp {
                return Err(Error::config("--ablation only applies to --method qp"));
            }
            for flag in &ablation {
                cfg.unlearn.ablation.set(flag)?;
            }
            let out = experiment::cmd_unlearn(&cfg, method, model.as_deref())?;
            if let Some(log) = &out.phase_log {
                for r in log {
                    eprintln!(
                        "{:<26} FA {:>7} RA {:>7} {:>9.2} ms{}",
                        r.phase,
                        r.forget_accuracy.map_or("--".into(), experiment::fmt2),
                        r.retain_accuracy.map_or("--".into(), experiment::fmt2),
                        r.wall_ms,
                        if r.skipped { " (skipped)" } else { "" }
                    );
                }
            }
            eprintln!("wrote {}", out.checkpoint.display());
            print_json(&out.report)?;
        }
        Command::Evaluate { model, original_report } => {
            let out = experiment::cmd_evaluate(&cfg, &model, &cfg.unlearn.forget_set, original_report.as_deref())?;
            print_json(&out)?;
        }
        Command::Sequential => {
            let steps = experiment::cmd_sequential(&cfg)?;
            print_json(&steps)?;
        }
        Command::Ablation => {
            let rows = experiment::cmd_ablation(&cfg)?;
            print!("{}", experiment::emit_table(&rows)?.markdown);
        }
        Command::Synth => {
            let spec = match &cfg.dataset {
                DatasetSource::Synthetic(s) => s.clone(),
                DatasetSource::Manifest(_) => SynthSpec::default(),
            };
            let n = experiment::cmd_synth(&spec, &cfg.output_dir)?;
            eprintln!("wrote {n} clips to {}", cfg.output_dir.display());
        }
        Command::Report { reports } => {
            let table = experiment::cmd_report(&reports, &cfg.output_dir)?;
            print!("{}", table.markdown);
        }
        Command::Run => {
            let rows = experiment::run_scenario(&cfg)?;
            print!("{}", experiment::emit_table(&rows)?.markdown);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
