//! `lfx`: synthesize, preprocess, train and compare landmark deepfake detectors.
//!
//! Exit codes: 0 success, 1 data or numeric error, 2 environment or I/O error.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lfx_core::models::ModelKind;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "lfx", version, about = "Landmark-trajectory deepfake detection")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Root seed for every random stream.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Segment store directory (default: <out>/segments).
    #[arg(long, global = true)]
    segments: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic landmark CSV and label manifest into --out.
    Synth(SynthArgs),
    /// Scale, standardize and featurize a landmark CSV into a segment store.
    Preprocess(PreprocessArgs),
    /// Train a model on a segment store; writes report, checkpoint and config into --out.
    Train(TrainArgs),
    /// Print a comparison table of every run report under a directory.
    Report { dir: PathBuf },
    /// Write the trajectory images of one stored segment as PGM files into --out.
    DumpImages {
        #[arg(long, default_value_t = 0)]
        segment_index: usize,
        #[arg(long)]
        raster_res: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    n_real: Option<usize>,
    #[arg(long)]
    n_fake: Option<usize>,
    #[arg(long)]
    frames: Option<usize>,
    /// Jitter half-width as a fraction of face size; 0 removes the signal.
    #[arg(long)]
    alpha: Option<f64>,
    /// Fraction of fake frames that are jittered.
    #[arg(long)]
    rho: Option<f64>,
}

#[derive(Args, Debug)]
struct PreprocessArgs {
    /// Landmark CSV (default: <out>/landmarks.csv).
    #[arg(long)]
    landmarks: Option<PathBuf>,
    /// Label manifest (default: <out>/labels.csv).
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    model: Option<ModelKind>,
    /// Collapse the schedule to one round of this many epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Collapse the schedule to one round with this batch size.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Training rounds as "epochs:batch,epochs:batch,...".
    #[arg(long)]
    rounds: Option<String>,
    #[arg(long)]
    raster_res: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    quiet: bool,
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.out.is_some() {
        cfg.out.clone_from(&common.out);
    }
    if common.segments.is_some() {
        cfg.paths.segments.clone_from(&common.segments);
    }
    Ok(cfg)
}

fn apply_train_flags(cfg: &mut RunConfig, a: &TrainArgs) -> Result<(), CliError> {
    if a.model.is_some() {
        cfg.model.kind = a.model;
    }
    if let Some(r) = &a.rounds {
        cfg.training.rounds = Some(r.clone());
    }
    if a.epochs.is_some() || a.batch_size.is_some() {
        let current = cfg.run_spec(lfx_core::preprocess::SEGMENT_FRAMES)?.rounds;
        let first = current.first().copied().unwrap_or(lfx_core::pipeline::Round {
            epochs: 1,
            batch_size: 16,
        });
        let epochs = a.epochs.unwrap_or(first.epochs);
        let batch = a.batch_size.unwrap_or(first.batch_size);
        cfg.training.rounds = Some(format!("{epochs}:{batch}"));
    }
    if a.lr.is_some() {
        cfg.training.lr = a.lr;
    }
    if a.raster_res.is_some() {
        cfg.raster.resolution = a.raster_res;
    }
    if a.noise_sigma.is_some() {
        cfg.raster.noise_sigma = a.noise_sigma;
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut cfg = load_config(&cli.common)?;
    match cli.command {
        Command::Synth(a) => {
            let s = &mut cfg.synth;
            s.n_real = a.n_real.or(s.n_real);
            s.n_fake = a.n_fake.or(s.n_fake);
            s.frames = a.frames.or(s.frames);
            s.alpha = a.alpha.or(s.alpha);
            s.rho = a.rho.or(s.rho);
            let out = commands::synth(&cfg)?;
            println!("wrote {}", out.display());
        }
        Command::Preprocess(a) => {
            cfg.paths.landmarks = a.landmarks.or(cfg.paths.landmarks);
            cfg.paths.manifest = a.manifest.or(cfg.paths.manifest);
            println!("{}", commands::preprocess(&cfg)?);
        }
        Command::Train(a) => {
            apply_train_flags(&mut cfg, &a)?;
            let report = commands::train(&cfg, a.quiet)?;
            for key in ["model", "test_accuracy", "test_precision", "test_recall", "test_f1", "test_roc_auc"] {
                println!("{key}={}", report.get(key).unwrap_or("?"));
            }
        }
        Command::Report { dir } => {
            commands::report(&dir, std::io::stdout().lock())?;
        }
        Command::DumpImages {
            segment_index,
            raster_res,
        } => {
            if raster_res.is_some() {
                cfg.raster.resolution = raster_res;
            }
            cfg.model.kind = Some(ModelKind::Cnn);
            let n = commands::dump_images(&cfg, segment_index)?;
            println!("wrote {n} images to {}", cfg.out().display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lfx: {e}");
            e.exit_code()
        }
    }
}
