use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use lfx_core::landmark_data::{parse_csv, parse_manifest};
use lfx_core::pipeline::{parse_report, render_report, run, ParsedReport};
use lfx_core::preprocess::{preprocess_corpus, read_store, write_store, PreprocessSummary};
use lfx_core::raster::{dump_pgm, segment_images};
use lfx_core::synth::{generate, write_corpus};

use crate::config::RunConfig;
use crate::error::CliError;

pub const REPORT_FILE: &str = "report.txt";
pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const CONFIG_FILE: &str = "config.toml";

fn open(path: &Path) -> Result<BufReader<fs::File>, CliError> {
    fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(format!("opening {}", path.display()), e))
}

pub fn synth(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let out = cfg.out();
    let corpus = generate(&cfg.synth_config());
    write_corpus(&out, &corpus).map_err(|e| CliError::io(format!("writing {}", out.display()), e))?;
    Ok(out)
}

pub fn preprocess(cfg: &RunConfig) -> Result<PreprocessSummary, CliError> {
    let manifest = parse_manifest(open(&cfg.manifest())?)?;
    let sequences = parse_csv(open(&cfg.landmarks())?, &manifest)?;
    let (segments, summary) = preprocess_corpus(&sequences)?;
    write_store(&cfg.segments(), &segments)?;
    Ok(summary)
}

pub fn train(cfg: &RunConfig, quiet: bool) -> Result<ParsedReport, CliError> {
    let segments = read_store(&cfg.segments())?;
    let frames = segments.first().map_or(lfx_core::preprocess::SEGMENT_FRAMES, |s| s.frames);
    let spec = cfg.run_spec(frames)?;
    let out = cfg.out();
    fs::create_dir_all(&out).map_err(|e| CliError::io(format!("creating {}", out.display()), e))?;
    let total: usize = spec.rounds.iter().map(|r| r.epochs).sum();
    let mut done = 0;
    let outcome = run(&segments, &spec, &mut |e| {
        done += 1;
        if !quiet {
            eprintln!(
                "[{done}/{total}] round {} epoch {}: train_loss={:.4} train_acc={:.3} val_loss={:.4} val_acc={:.3}",
                e.round, e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
            );
        }
    })?;
    let write = |name: &str, text: &str| {
        let path = out.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
    };
    let text = render_report(&spec, &outcome);
    write(REPORT_FILE, &text)?;
    write(CONFIG_FILE, &cfg.to_toml())?;
    outcome.classifier.save(&out.join(CHECKPOINT_FILE))?;
    parse_report(&text).map_err(CliError::from)
}

/// Writes the PGM channels of every splice of segment `index`.
pub fn dump_images(cfg: &RunConfig, index: usize) -> Result<usize, CliError> {
    let segments = read_store(&cfg.segments())?;
    let segment = segments
        .get(index)
        .ok_or_else(|| CliError::Data(format!("segment {index} out of range ({} stored)", segments.len())))?;
    let spec = cfg.run_spec(segment.frames)?;
    let images = segment_images(segment, &spec.raster(), None).map_err(lfx_core::pipeline::PipelineError::from)?;
    let out = cfg.out();
    for img in &images {
        dump_pgm(&out, img).map_err(lfx_core::pipeline::PipelineError::from)?;
    }
    Ok(images.len())
}

fn find_reports(dir: &Path, found: &mut Vec<PathBuf>) -> std::io::Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let path = entry.path();
        if path.is_dir() {
            find_reports(&path, found)?;
        } else if entry.file_name() == REPORT_FILE {
            found.push(path);
        }
    }
    Ok(())
}

pub const TABLE_COLUMNS: [&str; 7] = ["run", "model", "accuracy", "precision", "recall", "f1", "roc_auc"];

/// One row per `report.txt` under `dir`, metric columns in the fixed order
/// accuracy, precision, recall, F1, ROC-AUC.
pub fn report(dir: &Path, mut w: impl Write) -> Result<usize, CliError> {
    let mut found = Vec::new();
    find_reports(dir, &mut found).map_err(|e| CliError::io(format!("scanning {}", dir.display()), e))?;
    if found.is_empty() {
        return Err(CliError::Data(format!("no {REPORT_FILE} under {}", dir.display())));
    }
    let mut rows = vec![TABLE_COLUMNS.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for path in &found {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        let parsed = parse_report(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let run_name = path
            .parent()
            .and_then(|p| p.strip_prefix(dir).ok())
            .map(|p| p.display().to_string())
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| ".".into());
        let mut row = vec![run_name, parsed.get("model").unwrap_or("?").to_string()];
        for key in ["test_accuracy", "test_precision", "test_recall", "test_f1", "test_roc_auc"] {
            let v: f64 = parsed
                .get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| CliError::Data(format!("{}: missing {key}", path.display())))?;
            row.push(format!("{v:.4}"));
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..TABLE_COLUMNS.len())
        .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
        .collect();
    for row in &rows {
        let line: Vec<String> = row.iter().zip(&widths).map(|(cell, w)| format!("{cell:<w$}")).collect();
        writeln!(w, "{}", line.join("  ").trim_end()).map_err(|e| CliError::io("writing table", e))?;
    }
    Ok(found.len())
}
