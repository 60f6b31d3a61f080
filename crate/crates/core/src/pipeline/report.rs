//! Plain-text run report.
//!
//! ```text
//! format=lfx-report/1
//! model=rnn
//! …                          key=value header, one per line
//! test_roc_auc=0.98
//!                            blank line
//! round,epoch,train_loss,train_accuracy,val_loss,val_accuracy
//! 0,1,0.69,0.51,0.68,0.55
//! …
//! ```
//!
//! Floats are written in shortest round-trip form, so a report parses back
//! to the exact values that were written. Missing validation values are `NaN`.

use std::fmt::Write as _;

use super::metrics::EvalReport;
use super::run::{RunOutcome, RunSpec};
use super::train::EpochRecord;
use super::PipelineError;

pub const FORMAT: &str = "lfx-report/1";
pub const CURVE_HEADER: &str = "round,epoch,train_loss,train_accuracy,val_loss,val_accuracy";

fn push_eval(header: &mut Vec<(String, String)>, prefix: &str, r: &EvalReport) {
    let c = r.confusion;
    for (k, v) in [("tp", c.tp), ("fp", c.fp), ("tn", c.tn), ("fn", c.fn_)] {
        header.push((format!("{prefix}_{k}"), v.to_string()));
    }
    for (k, v) in [
        ("accuracy", r.accuracy),
        ("precision", r.precision),
        ("recall", r.recall),
        ("f1", r.f1),
        ("roc_auc", r.roc_auc),
    ] {
        header.push((format!("{prefix}_{k}"), format!("{v:?}")));
    }
}

pub fn report_header(spec: &RunSpec, outcome: &RunOutcome) -> Vec<(String, String)> {
    let mut h: Vec<(String, String)> = Vec::new();
    let mut kv = |k: &str, v: String| h.push((k.to_string(), v));
    kv("format", FORMAT.into());
    kv("model", spec.model.kind.to_string());
    kv("seed", spec.seed.to_string());
    kv("params", outcome.classifier.param_count().to_string());
    kv("lr", format!("{:?}", spec.adam.lr));
    kv(
        "rounds",
        spec.rounds
            .iter()
            .map(|r| format!("{}:{}", r.epochs, r.batch_size))
            .collect::<Vec<_>>()
            .join(","),
    );
    let f = spec.fractions;
    kv("fractions", format!("{:?}/{:?}/{:?}", f.train, f.validation, f.test));
    kv("raster_resolution", spec.model.resolution.to_string());
    kv("noise_sigma", format!("{:?}", spec.noise_sigma));
    kv("videos_train", outcome.plan.train.len().to_string());
    kv("videos_validation", outcome.plan.validation.len().to_string());
    kv("videos_test", outcome.plan.test.len().to_string());
    for (name, n) in ["train", "validation", "test"].iter().zip(outcome.samples) {
        kv(&format!("samples_{name}"), n.to_string());
    }
    for r in &outcome.rounds {
        let p = format!("round{}", r.round);
        h.push((format!("{p}_epochs"), r.epochs.to_string()));
        h.push((format!("{p}_batch_size"), r.batch_size.to_string()));
        h.push((format!("{p}_best_epoch"), r.best_epoch.to_string()));
        h.push((format!("{p}_best_val_loss"), format!("{:?}", r.best_val_loss)));
        if let Some(v) = &r.validation {
            push_eval(&mut h, &format!("{p}_val"), v);
        }
    }
    h.push(("test_loss".into(), format!("{:?}", outcome.test_loss)));
    push_eval(&mut h, "test", &outcome.test);
    h
}

pub fn render_report(spec: &RunSpec, outcome: &RunOutcome) -> String {
    let mut s = String::new();
    for (k, v) in report_header(spec, outcome) {
        let _ = writeln!(s, "{k}={v}");
    }
    let _ = writeln!(s, "\n{CURVE_HEADER}");
    for e in outcome.curves() {
        let _ = writeln!(
            s,
            "{},{},{:?},{:?},{:?},{:?}",
            e.round, e.epoch, e.train_loss, e.train_accuracy, e.val_loss, e.val_accuracy
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub header: Vec<(String, String)>,
    pub curves: Vec<EpochRecord>,
}

impl ParsedReport {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

pub fn parse_report(text: &str) -> Result<ParsedReport, PipelineError> {
    let bad = |line: usize, m: &str| PipelineError::Report(format!("line {line}: {m}"));
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut header = Vec::new();
    for (n, line) in lines.by_ref() {
        if line.is_empty() {
            break;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| bad(n, "expected key=value"))?;
        header.push((k.to_string(), v.to_string()));
    }
    if header.first().map(|(k, v)| (k.as_str(), v.as_str())) != Some(("format", FORMAT)) {
        return Err(bad(1, "not an lfx report"));
    }
    match lines.next() {
        Some((_, CURVE_HEADER)) => {}
        Some((n, _)) => return Err(bad(n, "expected the curve header")),
        None => return Err(bad(header.len() + 1, "missing curve table")),
    }
    let mut curves = Vec::new();
    for (n, line) in lines {
        let cells: Vec<&str> = line.split(',').collect();
        let [round, epoch, tl, ta, vl, va] = cells[..] else {
            return Err(bad(n, "expected 6 columns"));
        };
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(n, "bad integer"));
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad(n, "bad number"));
        curves.push(EpochRecord {
            round: int(round)?,
            epoch: int(epoch)?,
            train_loss: float(tl)?,
            train_accuracy: float(ta)?,
            val_loss: float(vl)?,
            val_accuracy: float(va)?,
        });
    }
    Ok(ParsedReport { header, curves })
}
