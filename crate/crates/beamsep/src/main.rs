//! Thin command-line front end over the library: `simulate`, `train`,
//! `infer`, `eval`.

use beamsep::error::Error;
use beamsep::metrics::{evaluate_set, format_report_table};
use beamsep::signal::{read_wav, write_wav, MultiWave, WavEncoding};
use beamsep::simulate::{generate_dataset, read_manifest};
use beamsep::train::{Model, TrainConfig};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "beamsep",
    about = "Multi-channel speech separation: simulation, training, inference and scoring",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-channel dataset with a JSON-lines manifest.
    Simulate {
        /// TOML/JSON config with a [dataset] section.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for WAVs and manifest.jsonl.
        #[arg(long)]
        out: PathBuf,
        /// Override the dataset seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train a system variant against a simulated dataset.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Dataset directory (holds manifest.jsonl).
        #[arg(long)]
        data: PathBuf,
        /// Output directory for the checkpoint and training log.
        #[arg(long)]
        out: PathBuf,
        /// Override the training seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Enhance a multi-channel mixture WAV with a trained checkpoint.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Input multi-channel mixture WAV.
        #[arg(long)]
        input: PathBuf,
        /// Output single-channel WAV.
        #[arg(long)]
        output: PathBuf,
        /// Target direction of arrival in degrees (required by the
        /// directional feature).
        #[arg(long)]
        doa: Option<f64>,
    },
    /// Score enhanced files against a dataset manifest.
    Eval {
        /// Path to manifest.jsonl.
        #[arg(long)]
        manifest: PathBuf,
        /// Directory with enhanced files named `{id}.wav`.
        #[arg(long)]
        enhanced: PathBuf,
        /// Optional JSON report output path.
        #[arg(long)]
        out: Option<PathBuf>,
        /// FIR length for projection SDR.
        #[arg(long, default_value_t = 512)]
        filter_len: usize,
    },
}

fn run(cli: Cli) -> beamsep::Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => {
            let cfg = TrainConfig::load(&config)?;
            let mut spec = cfg
                .dataset
                .ok_or_else(|| Error::Config("config has no [dataset] section".into()))?;
            if let Some(s) = seed {
                spec.seed = s;
            }
            let rows = generate_dataset(&spec, &out)?;
            println!(
                "wrote {} scenes to {} (manifest.jsonl)",
                rows.len(),
                out.display()
            );
        }
        Command::Train {
            config,
            data,
            out,
            seed,
        } => {
            let mut cfg = TrainConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.train.seed = s;
            }
            let outcome = beamsep::train::train(&cfg, &data, &out)?;
            println!(
                "trained {} steps; best val Si-SNR {:.2} dB; checkpoint {}",
                outcome.steps_run,
                outcome.best_val_si_snr,
                outcome.checkpoint.display()
            );
            println!(
                "stability: {} NaN-loss events, {} denominator floors, {} loading floors",
                outcome.nan_loss_events, outcome.denom_floors, outcome.loading_floors
            );
        }
        Command::Infer {
            checkpoint,
            input,
            output,
            doa,
        } => {
            let model = Model::load(&checkpoint)?;
            let mixture = read_wav(&input)?;
            let doa = doa.ok_or_else(|| {
                Error::Config(
                    "--doa <degrees> is required: this checkpoint uses the directional feature"
                        .into(),
                )
            })?;
            let (wave, stats) = model.enhance(&mixture, doa.to_radians())?;
            write_wav(&output, &MultiWave::from_mono(wave), WavEncoding::Float32)?;
            if stats.denom_floors + stats.loading_floors > 0 {
                eprintln!(
                    "note: {} denominator floors, {} loading floors",
                    stats.denom_floors, stats.loading_floors
                );
            }
            println!("wrote {}", output.display());
        }
        Command::Eval {
            manifest,
            enhanced,
            out,
            filter_len,
        } => {
            let rows = read_manifest(&manifest)?;
            let dir = manifest
                .parent()
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("."));
            let report = evaluate_set(&rows, &dir, &enhanced, filter_len)?;
            print!("{}", format_report_table(&report));
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Other(e.to_string()))?;
                std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
                println!("report written to {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            eprintln!("run `beamsep <command> --help` for usage");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
