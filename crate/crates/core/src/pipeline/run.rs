//! One end-to-end training run: split, train in rounds, evaluate on test.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::dataset::Dataset;
use super::metrics::EvalReport;
use super::split::{audit, split, Fractions, Partition, SplitPlan};
use super::train::{cross_validate, default_rounds, evaluate, EpochRecord, Round, RoundReport, TrainOptions};
use super::PipelineError;
use crate::landmark_data::Label;
use crate::models::{Classifier, ModelKind, ModelSpec};
use crate::preprocess::Segment;
use crate::raster::{RasterConfig, DEFAULT_SIGMA};
use crate::seed;
use crate::tensor_nn::AdamConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub model: ModelSpec,
    pub fractions: Fractions,
    pub rounds: Vec<Round>,
    pub adam: AdamConfig,
    /// Training-image noise; the raster resolution is `model.resolution`.
    pub noise_sigma: f64,
    /// Root of every random stream in the run.
    pub seed: u64,
}

impl RunSpec {
    pub fn new(kind: ModelKind, seed_value: u64) -> RunSpec {
        RunSpec {
            model: ModelSpec::default_for(kind),
            fractions: Fractions::default(),
            rounds: default_rounds(),
            adam: AdamConfig {
                lr: default_lr(kind),
                ..AdamConfig::default()
            },
            noise_sigma: DEFAULT_SIGMA,
            seed: seed_value,
        }
    }

    pub fn raster(&self) -> RasterConfig {
        RasterConfig {
            resolution: self.model.resolution,
            sigma: self.noise_sigma,
        }
    }
}

/// The dense network sees 391,680 inputs per sample; Adam's per-weight steps
/// at the shared rate overshoot there.
pub fn default_lr(kind: ModelKind) -> f64 {
    match kind {
        ModelKind::Ann => 1e-4,
        ModelKind::Rnn | ModelKind::Cnn => AdamConfig::default().lr,
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub classifier: Classifier,
    pub plan: SplitPlan,
    pub rounds: Vec<RoundReport>,
    pub test: EvalReport,
    pub test_loss: f64,
    /// Samples per partition: train, validation, test.
    pub samples: [usize; 3],
}

impl RunOutcome {
    pub fn curves(&self) -> impl Iterator<Item = &EpochRecord> {
        self.rounds.iter().flat_map(|r| r.curves.iter())
    }
}

/// Distinct `(video_id, label)` pairs in first-appearance order.
pub fn videos_of(segments: &[Segment]) -> Vec<(String, Label)> {
    let mut seen = HashMap::new();
    let mut out = Vec::new();
    for s in segments {
        if seen.insert(s.source_video_id.as_str(), ()).is_none() {
            out.push((s.source_video_id.clone(), s.label));
        }
    }
    out
}

pub fn run(segments: &[Segment], spec: &RunSpec, on_epoch: &mut dyn FnMut(&EpochRecord)) -> Result<RunOutcome, PipelineError> {
    let videos = videos_of(segments);
    let plan = split(&videos, &spec.fractions, seed::derive(spec.seed, "split", 0))?;
    audit(&plan, &videos)?;

    let owner: HashMap<&str, Partition> = [
        (Partition::Train, &plan.train),
        (Partition::Validation, &plan.validation),
        (Partition::Test, &plan.test),
    ]
    .into_iter()
    .flat_map(|(p, ids)| ids.iter().map(move |id| (id.as_str(), p)))
    .collect();
    let pick = |p: Partition| -> Vec<&Segment> {
        segments.iter().filter(|s| owner[s.source_video_id.as_str()] == p).collect()
    };

    let model_spec = ModelSpec {
        seed: spec.seed,
        ..spec.model.clone()
    };
    let raster = spec.raster();
    let noise_root = seed::derive(spec.seed, "noise", 0);
    let train_set = Dataset::new(&model_spec, pick(Partition::Train), raster, Some(noise_root))?;
    let val_set = Dataset::new(&model_spec, pick(Partition::Validation), raster, None)?;
    let test_set = Dataset::new(&model_spec, pick(Partition::Test), raster, None)?;
    if test_set.is_empty() {
        return Err(PipelineError::EmptyPartition("test"));
    }

    let mut classifier = Classifier::build(&model_spec)?;
    if model_spec.standardize_inputs && model_spec.kind != ModelKind::Cnn {
        let (mean, std) = train_set.feature_moments();
        classifier.fit_input_standardization(&mean, &std)?;
    }
    let opts = TrainOptions {
        adam: spec.adam,
        seed: seed::derive(spec.seed, "train", 0),
    };
    let rounds = cross_validate(&mut classifier, &train_set, Some(&val_set), &spec.rounds, &opts, on_epoch)?;
    let (test_loss, test) = evaluate(&classifier, &test_set)?;
    Ok(RunOutcome {
        classifier,
        plan,
        rounds,
        test,
        test_loss,
        samples: [train_set.len(), val_set.len(), test_set.len()],
    })
}
