//! Landmark-trajectory deepfake detection.
//!
//! The crate turns per-frame 68-point facial landmark sequences into
//! real/fake verdicts:
//!
//! - [`landmark_data`]: domain types and the landmark CSV / label manifest formats.
//! - [`preprocess`]: per-frame min-max scaling, 720-frame standardization and
//!   differential feature engineering.
//! - [`tensor_nn`]: dense tensors and hand-written layers (dense, LSTM, conv2d,
//!   dropout, activations), BCE loss, Adam and a finite-difference gradient checker.
//! - [`raster`]: one-second trajectory images for the convolutional model.
//! - [`models`]: the ANN, LSTM-RNN and CNN classifiers.
//! - [`pipeline`]: video-level splitting, training rounds, metrics and run reports.
//! - [`synth`]: a seeded synthetic corpus with a controllable temporal-jitter signal.

pub mod landmark_data;
pub mod models;
pub mod pipeline;
pub mod preprocess;
pub mod raster;
pub mod seed;
pub mod synth;
pub mod tensor_nn;

pub use landmark_data::{Label, LandmarkFrame, LandmarkSequence, Point2};
pub use models::{Classifier, ModelKind, ModelSpec};
pub use preprocess::Segment;
pub use tensor_nn::Tensor;
