//! Splitting, training rounds, metrics and run reports.
//!
//! Partitions are drawn at source-video granularity, so every segment and
//! splice of a video lands in the same set. What the literature calls
//! three-round cross-validation is staged re-training here: each round
//! continues from the previous one with its own epoch count and batch size.

mod dataset;
mod metrics;
mod report;
mod run;
mod split;
mod train;

use thiserror::Error;

pub use dataset::Dataset;
pub use metrics::{confusion, metrics, rates, roc_auc, Confusion, EvalReport};
pub use report::{parse_report, render_report, report_header, ParsedReport, CURVE_HEADER, FORMAT};
pub use run::{default_lr, run, videos_of, RunOutcome, RunSpec};
pub use split::{audit, partition_sizes, split, Fractions, Partition, SplitPlan};
pub use train::{
    cross_validate, default_rounds, evaluate, parse_rounds, score_dataset, train, EpochRecord, Round, RoundReport,
    TrainOptions, EVAL_BATCH,
};

use crate::models::ModelError;
use crate::raster::RasterError;
use crate::tensor_nn::NnError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("need at least 3 distinct videos, found {0}")]
    TooFewVideos(usize),
    #[error("video {0:?} carries both labels")]
    ConflictingLabel(String),
    #[error("split fractions must be in [0, 1] and sum to 1, got {0:?}")]
    InvalidFractions(Fractions),
    #[error("partition leakage: {0}")]
    Leakage(String),
    #[error("the {0} partition is empty")]
    EmptyPartition(&'static str),
    #[error("no training rounds configured")]
    NoRounds,
    #[error("{scores} scores but {labels} labels")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no samples to evaluate")]
    EmptyInput,
    #[error("non-finite loss {loss} in round {round}, epoch {epoch}, batch {batch}")]
    NonFiniteLoss {
        round: usize,
        epoch: usize,
        batch: usize,
        loss: f64,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("report: {0}")]
    Report(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Raster(#[from] RasterError),
}

impl From<NnError> for PipelineError {
    fn from(e: NnError) -> Self {
        PipelineError::Model(ModelError::Nn(e))
    }
}
