//! Confusion-matrix rates and ROC-AUC. `Fake` is the positive class.

use super::PipelineError;
use crate::landmark_data::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub confusion: Confusion,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub roc_auc: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(scores: &[f64], labels: &[Label], threshold: f64) -> Confusion {
    let mut c = Confusion::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, Label::Fake) => c.tp += 1,
            (true, Label::Real) => c.fp += 1,
            (false, Label::Real) => c.tn += 1,
            (false, Label::Fake) => c.fn_ += 1,
        }
    }
    c
}

pub fn rates(c: Confusion) -> (f64, f64, f64, f64) {
    let accuracy = ratio(c.tp + c.tn, c.total());
    let precision = ratio(c.tp, c.tp + c.fp);
    let recall = ratio(c.tp, c.tp + c.fn_);
    // Equal to 2PR / (P + R), written over counts so it rounds only once;
    // zero when there are no true positives.
    let f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_);
    (accuracy, precision, recall, f1)
}

/// Area under the ROC curve by trapezoids between tied-score groups, which
/// equals the rank-averaged Mann-Whitney statistic. Defined as 0.5 when one
/// class is absent.
pub fn roc_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let pos = labels.iter().filter(|&&l| l == Label::Fake).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return 0.5;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut area = 0.0;
    let mut i = 0;
    while i < order.len() {
        let (tp0, fp0) = (tp, fp);
        let s = scores[order[i]];
        while i < order.len() && scores[order[i]] == s {
            match labels[order[i]] {
                Label::Fake => tp += 1,
                Label::Real => fp += 1,
            }
            i += 1;
        }
        area += (fp - fp0) as f64 * (tp + tp0) as f64 / 2.0;
    }
    area / (pos as f64 * neg as f64)
}

pub fn metrics(scores: &[f64], labels: &[Label], threshold: f64) -> Result<EvalReport, PipelineError> {
    if scores.len() != labels.len() {
        return Err(PipelineError::LengthMismatch {
            scores: scores.len(),
            labels: labels.len(),
        });
    }
    if scores.is_empty() {
        return Err(PipelineError::EmptyInput);
    }
    let c = confusion(scores, labels, threshold);
    let (accuracy, precision, recall, f1) = rates(c);
    Ok(EvalReport {
        confusion: c,
        accuracy,
        precision,
        recall,
        f1,
        roc_auc: roc_auc(scores, labels),
    })
}
