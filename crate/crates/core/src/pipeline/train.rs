//! Mini-batch Adam training with best-validation-loss selection, and staged
//! training rounds.

use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::metrics::{metrics, EvalReport};
use super::PipelineError;
use crate::models::{predict_label, Classifier};
use crate::seed;
use crate::tensor_nn::{adam_step, bce_loss, AdamConfig, Mode, Tensor};

/// Samples per forward pass when scoring.
pub const EVAL_BATCH: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Round {
    pub epochs: usize,
    pub batch_size: usize,
}

/// Three rounds with growing epochs and batch sizes.
pub fn default_rounds() -> Vec<Round> {
    [(5, 16), (10, 32), (15, 64)]
        .into_iter()
        .map(|(epochs, batch_size)| Round { epochs, batch_size })
        .collect()
}

/// Parses `"e:b,e:b,…"`.
pub fn parse_rounds(s: &str) -> Result<Vec<Round>, String> {
    let rounds = s
        .split(',')
        .map(|part| {
            let (e, b) = part
                .trim()
                .split_once(':')
                .ok_or_else(|| format!("round {part:?} is not epochs:batch_size"))?;
            let num = |v: &str| usize::from_str(v.trim()).map_err(|_| format!("round {part:?}: {v:?} is not a count"));
            Ok(Round {
                epochs: num(e)?,
                batch_size: num(b)?,
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    if rounds.iter().any(|r| r.batch_size == 0) {
        return Err("batch size must be positive".into());
    }
    Ok(rounds)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainOptions {
    pub adam: AdamConfig,
    /// Root of the shuffle and dropout streams.
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub round: usize,
    /// 1-based within its round.
    pub epoch: usize,
    /// Mean over the epoch's batches, measured in training mode.
    pub train_loss: f64,
    pub train_accuracy: f64,
    /// `NaN` when there is no validation set.
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundReport {
    pub round: usize,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epoch whose parameters were kept; 0 means the final parameters.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub curves: Vec<EpochRecord>,
    /// Validation metrics of the kept parameters.
    pub validation: Option<EvalReport>,
}

/// Eval-mode scores over the whole dataset, in sample order.
pub fn score_dataset(model: &Classifier, data: &Dataset<'_>) -> Result<Vec<f64>, PipelineError> {
    let idx: Vec<usize> = (0..data.len()).collect();
    let mut scores = Vec::with_capacity(data.len());
    for chunk in idx.chunks(EVAL_BATCH) {
        scores.extend(model.scores(&data.batch(chunk)?)?);
    }
    Ok(scores)
}

/// Scores, mean BCE and metrics of a dataset.
pub fn evaluate(model: &Classifier, data: &Dataset<'_>) -> Result<(f64, EvalReport), PipelineError> {
    let scores = score_dataset(model, data)?;
    let labels = data.labels();
    let targets = Tensor::new(vec![labels.len()], labels.iter().map(|l| l.as_f64()).collect())?;
    let (loss, _) = bce_loss(&Tensor::new(vec![scores.len()], scores.clone())?, &targets)?;
    Ok((loss, metrics(&scores, &labels, 0.5)?))
}

/// Trains for `round.epochs` epochs and restores the parameters with the
/// lowest validation loss. Shuffling and dropout draw from streams keyed by
/// `(opts.seed, round_index, epoch)`. Optimizer moments are not rolled back.
pub fn train(
    model: &mut Classifier,
    train_set: &Dataset<'_>,
    validation: Option<&Dataset<'_>>,
    round: Round,
    round_index: usize,
    opts: &TrainOptions,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<RoundReport, PipelineError> {
    if train_set.is_empty() {
        return Err(PipelineError::EmptyPartition("train"));
    }
    let validation = validation.filter(|v| !v.is_empty());
    let (adam, seed_value) = (&opts.adam, opts.seed);
    let key = round_index.to_string();
    let mut best: Option<(f64, usize, Vec<Tensor>)> = None;
    let mut curves = Vec::with_capacity(round.epochs);
    for epoch in 1..=round.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        order.shuffle(&mut seed::rng(seed::derive_keyed(seed_value, "shuffle", &key, epoch as u64)));
        let mut dropout_rng = seed::rng(seed::derive_keyed(seed_value, "dropout", &key, epoch as u64));
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, chunk) in order.chunks(round.batch_size).enumerate() {
            let x = train_set.batch(chunk)?;
            let y = train_set.targets(chunk);
            model.network.zero_grad();
            let (p, caches) = model.forward(&x, &mut Mode::Train(&mut dropout_rng))?;
            let (loss, dp) = bce_loss(&p, &y)?;
            if !loss.is_finite() {
                return Err(PipelineError::NonFiniteLoss {
                    round: round_index,
                    epoch,
                    batch: b,
                    loss,
                });
            }
            model.backward(&caches, &dp)?;
            for state in model.network.states_mut() {
                adam_step(state, adam);
            }
            loss_sum += loss * chunk.len() as f64;
            correct += p
                .data()
                .iter()
                .zip(chunk)
                .filter(|&(&s, &i)| predict_label(s) == train_set.label(i))
                .count();
        }
        let (val_loss, val_accuracy) = match validation {
            Some(v) => {
                let (loss, report) = evaluate(model, v)?;
                if best.as_ref().is_none_or(|(b, _, _)| loss < *b) {
                    best = Some((loss, epoch, model.network.param_values()));
                }
                (loss, report.accuracy)
            }
            None => (f64::NAN, f64::NAN),
        };
        let record = EpochRecord {
            round: round_index,
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_loss,
            val_accuracy,
        };
        on_epoch(&record);
        curves.push(record);
    }
    let (best_val_loss, best_epoch) = match best {
        Some((loss, epoch, values)) => {
            model.network.set_param_values(&values)?;
            (loss, epoch)
        }
        None => (f64::NAN, 0),
    };
    let validation = validation.map(|v| evaluate(model, v).map(|(_, r)| r)).transpose()?;
    Ok(RoundReport {
        round: round_index,
        epochs: round.epochs,
        batch_size: round.batch_size,
        best_epoch,
        best_val_loss,
        curves,
        validation,
    })
}

/// Sequential rounds that keep training the same parameters and optimizer
/// state. A single round is identical to one [`train`] call with
/// `round_index = 0`.
pub fn cross_validate(
    model: &mut Classifier,
    train_set: &Dataset<'_>,
    validation: Option<&Dataset<'_>>,
    rounds: &[Round],
    opts: &TrainOptions,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<Vec<RoundReport>, PipelineError> {
    if rounds.is_empty() {
        return Err(PipelineError::NoRounds);
    }
    rounds
        .iter()
        .enumerate()
        .map(|(i, &r)| train(model, train_set, validation, r, i, opts, on_epoch))
        .collect()
}
