//! The three classifiers behind one interface.
//!
//! | kind | input                     | body                                          |
//! |------|---------------------------|-----------------------------------------------|
//! | ann  | `[B, frames * features]`  | dense+ReLU+dropout per hidden width           |
//! | rnn  | `[B, frames, features]`   | stacked LSTMs, dense+ReLU+dropout head        |
//! | cnn  | `[B, 68, R, R]`           | (conv+ReLU+dropout) × n, flatten, dense+ReLU  |
//!
//! Every network ends in `dense(1)` and a sigmoid. ANN and RNN inputs first
//! pass a per-feature standardization fitted on the training partition; the
//! differential columns are orders of magnitude smaller than the positions
//! and the networks barely move without it.

use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::landmark_data::{Label, NUM_POINTS};
use crate::preprocess::{FEATURE_COLUMNS, SEGMENT_FRAMES};
use crate::raster::DEFAULT_RESOLUTION;
use crate::seed;
use crate::tensor_nn::checkpoint::{read_checkpoint, write_checkpoint};
use crate::tensor_nn::{Cache, Conv2d, Dense, Dropout, Layer, Lstm, Mode, Network, NnError, Standardize, Tensor};

/// Scores are kept this far away from 0 and 1.
pub const SCORE_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ann,
    Rnn,
    Cnn,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Ann => "ann",
            ModelKind::Rnn => "rnn",
            ModelKind::Cnn => "cnn",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "ann" => Ok(ModelKind::Ann),
            "rnn" => Ok(ModelKind::Rnn),
            "cnn" => Ok(ModelKind::Cnn),
            other => Err(format!("unknown model kind {other:?} (expected ann, rnn or cnn)")),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// Sequence length (ann, rnn).
    pub frames: usize,
    /// Feature width per frame (ann, rnn).
    pub features: usize,
    /// LSTM widths, bottom to top (rnn).
    pub lstm_units: Vec<usize>,
    /// Hidden dense widths before the output unit.
    pub dense_units: Vec<usize>,
    pub dropout: f64,
    /// Output channels of each conv layer (cnn).
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    /// Image channels and side length (cnn).
    pub image_channels: usize,
    pub resolution: usize,
    /// Prepend a fitted per-feature standardization (ann, rnn).
    pub standardize_inputs: bool,
    /// Weight initialization seed.
    pub seed: u64,
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind) -> ModelSpec {
        let base = ModelSpec {
            kind,
            frames: SEGMENT_FRAMES,
            features: FEATURE_COLUMNS,
            lstm_units: Vec::new(),
            dense_units: Vec::new(),
            dropout: 0.0,
            conv_channels: Vec::new(),
            kernel: 3,
            image_channels: NUM_POINTS,
            resolution: DEFAULT_RESOLUTION,
            standardize_inputs: kind != ModelKind::Cnn,
            seed: 0,
        };
        match kind {
            ModelKind::Rnn => ModelSpec {
                lstm_units: vec![64, 32],
                dense_units: vec![16],
                dropout: 0.2,
                ..base
            },
            // Five hidden layers, narrowed so the first weight matrix over
            // 391,680 inputs fits in desk memory. Dropout 0.3 between layers
            // this narrow stops the network fitting at all.
            ModelKind::Ann => ModelSpec {
                dense_units: vec![64, 32, 32, 32, 32],
                dropout: 0.1,
                ..base
            },
            ModelKind::Cnn => ModelSpec {
                conv_channels: vec![32, 16],
                dense_units: vec![64],
                dropout: 0.25,
                ..base
            },
        }
    }

    /// Per-sample input shape, without the batch axis.
    pub fn sample_shape(&self) -> Vec<usize> {
        match self.kind {
            ModelKind::Ann => vec![self.frames * self.features],
            ModelKind::Rnn => vec![self.frames, self.features],
            ModelKind::Cnn => vec![self.image_channels, self.resolution, self.resolution],
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidSpec(m));
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if self.dense_units.contains(&0) || self.lstm_units.contains(&0) || self.conv_channels.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        match self.kind {
            ModelKind::Ann | ModelKind::Rnn if self.frames == 0 || self.features == 0 => {
                bad("frames and features must be positive".into())
            }
            ModelKind::Rnn if self.lstm_units.is_empty() => bad("rnn needs at least one LSTM layer".into()),
            ModelKind::Cnn => {
                if self.conv_channels.is_empty() || self.kernel == 0 || self.image_channels == 0 {
                    return bad("cnn needs conv channels, a kernel size and image channels".into());
                }
                let shrink = self.conv_channels.len() * (self.kernel - 1);
                if self.resolution <= shrink {
                    return bad(format!(
                        "resolution {} too small for {} valid {}x{} convolutions",
                        self.resolution,
                        self.conv_channels.len(),
                        self.kernel,
                        self.kernel
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model spec: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    pub spec: ModelSpec,
    pub network: Network,
}

fn push_dense_block(layers: &mut Vec<Layer>, fan_in: usize, widths: &[usize], dropout: f64, rng: &mut rand_chacha::ChaCha8Rng) -> Result<usize, ModelError> {
    let mut width = fan_in;
    for &w in widths {
        layers.push(Layer::Dense(Dense::new(width, w, rng)));
        layers.push(Layer::relu());
        if dropout > 0.0 {
            layers.push(Layer::Dropout(Dropout::new(dropout)?));
        }
        width = w;
    }
    Ok(width)
}

impl Classifier {
    pub fn build(spec: &ModelSpec) -> Result<Classifier, ModelError> {
        spec.validate()?;
        let mut rng = seed::rng(seed::derive(spec.seed, "init", 0));
        let mut layers = Vec::new();
        if spec.standardize_inputs && spec.kind != ModelKind::Cnn {
            layers.push(Layer::Standardize(Standardize::identity(spec.features)));
        }
        let width = match spec.kind {
            ModelKind::Ann => push_dense_block(&mut layers, spec.frames * spec.features, &spec.dense_units, spec.dropout, &mut rng)?,
            ModelKind::Rnn => {
                let mut width = spec.features;
                for (i, &units) in spec.lstm_units.iter().enumerate() {
                    let last = i + 1 == spec.lstm_units.len();
                    layers.push(Layer::Lstm(Lstm::new(width, units, !last, &mut rng)));
                    width = units;
                }
                push_dense_block(&mut layers, width, &spec.dense_units, spec.dropout, &mut rng)?
            }
            ModelKind::Cnn => {
                let (mut c, mut side) = (spec.image_channels, spec.resolution);
                for &out in &spec.conv_channels {
                    layers.push(Layer::Conv2d(Conv2d::new(c, out, spec.kernel, &mut rng)));
                    layers.push(Layer::relu());
                    if spec.dropout > 0.0 {
                        layers.push(Layer::Dropout(Dropout::new(spec.dropout)?));
                    }
                    c = out;
                    side -= spec.kernel - 1;
                }
                layers.push(Layer::Flatten);
                push_dense_block(&mut layers, c * side * side, &spec.dense_units, 0.0, &mut rng)?
            }
        };
        layers.push(Layer::Dense(Dense::new(width, 1, &mut rng)));
        layers.push(Layer::sigmoid());
        Ok(Classifier {
            spec: spec.clone(),
            network: Network::new(layers),
        })
    }

    fn check_input(&self, batch: &Tensor) -> Result<(), ModelError> {
        let shape = batch.shape();
        if shape.len() < 2 || shape[1..] != self.spec.sample_shape()[..] {
            return Err(NnError::ShapeMismatch(format!(
                "{} expects [batch, {:?}], got {shape:?}",
                self.spec.kind,
                self.spec.sample_shape()
            ))
            .into());
        }
        Ok(())
    }

    /// Raw sigmoid outputs `[B, 1]` plus caches for [`Classifier::backward`].
    pub fn forward(&self, batch: &Tensor, mode: &mut Mode<'_>) -> Result<(Tensor, Vec<Cache>), ModelError> {
        self.check_input(batch)?;
        Ok(self.network.forward(batch, mode)?)
    }

    pub fn backward(&mut self, caches: &[Cache], grad_output: &Tensor) -> Result<(), ModelError> {
        self.network.backward(caches, grad_output, false)?;
        Ok(())
    }

    /// Evaluation-mode scores, each strictly inside `(0, 1)`.
    pub fn scores(&self, batch: &Tensor) -> Result<Vec<f64>, ModelError> {
        self.check_input(batch)?;
        let out = self.network.infer(batch)?;
        Ok(out.data().iter().map(|&p| p.clamp(SCORE_MARGIN, 1.0 - SCORE_MARGIN)).collect())
    }

    pub fn param_count(&self) -> usize {
        self.network.param_count()
    }

    /// Fits the input standardization; a no-op when the model has none.
    pub fn fit_input_standardization(&mut self, mean: &[f64], std: &[f64]) -> Result<(), ModelError> {
        if let Some(Layer::Standardize(s)) = self.network.layers.first_mut() {
            s.fit(mean, std)?;
        }
        Ok(())
    }

    fn named_tensors(&self) -> Vec<(String, &Tensor)> {
        let mut t = self.network.named_params();
        t.extend(self.network.named_buffers());
        t
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let manifest = serde_json::to_string(&self.spec).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let mut w = BufWriter::new(fs::File::create(path)?);
        write_checkpoint(&mut w, &manifest, &self.named_tensors())?;
        std::io::Write::flush(&mut w)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Classifier, ModelError> {
        let (manifest, tensors) = read_checkpoint(BufReader::new(fs::File::open(path)?))?;
        let spec: ModelSpec = serde_json::from_str(&manifest).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let mut model = Classifier::build(&spec)?;
        let names: Vec<String> = model.named_tensors().into_iter().map(|(n, _)| n).collect();
        if names.len() != tensors.len() || names.iter().zip(&tensors).any(|(a, (b, _))| a != b) {
            return Err(ModelError::Checkpoint("tensor names do not match the architecture".into()));
        }
        let mut values: Vec<Tensor> = tensors.into_iter().map(|(_, t)| t).collect();
        let buffers = values.split_off(model.network.named_params().len());
        model.network.set_param_values(&values)?;
        for (slot, value) in model.network.buffers_mut().into_iter().zip(buffers) {
            if slot.shape() != value.shape() {
                return Err(ModelError::Checkpoint("buffer shape does not match the architecture".into()));
            }
            *slot = value;
        }
        Ok(model)
    }
}

/// `score ≥ 0.5` is fake; an exact tie goes to fake.
pub fn predict_label(score: f64) -> Label {
    if score >= 0.5 {
        Label::Fake
    } else {
        Label::Real
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lstm_params(fan_in: usize, h: usize) -> usize {
        4 * h * (fan_in + h + 1)
    }

    fn dense_params(fan_in: usize, out: usize) -> usize {
        fan_in * out + out
    }

    #[test]
    fn default_rnn_parameter_count() {
        let m = Classifier::build(&ModelSpec::default_for(ModelKind::Rnn)).unwrap();
        let expected = lstm_params(544, 64) + lstm_params(64, 32) + dense_params(32, 16) + dense_params(16, 1);
        assert_eq!(m.param_count(), expected);
    }

    #[test]
    fn ann_has_five_hidden_layers_plus_output() {
        let spec = ModelSpec {
            frames: 4,
            features: 10,
            ..ModelSpec::default_for(ModelKind::Ann)
        };
        let m = Classifier::build(&spec).unwrap();
        let dense: Vec<_> = m.network.layers.iter().filter(|l| matches!(l, Layer::Dense(_))).collect();
        assert_eq!(dense.len(), 6);
        let dropouts = m.network.layers.iter().filter(|l| matches!(l, Layer::Dropout(_))).count();
        assert_eq!(dropouts, 5);
        let widths = [40, 64, 32, 32, 32, 32, 1];
        let expected: usize = widths.windows(2).map(|w| dense_params(w[0], w[1])).sum();
        assert_eq!(m.param_count(), expected);
    }

    #[test]
    fn cnn_zero_image_with_zero_output_bias_scores_half() {
        let spec = ModelSpec {
            resolution: 8,
            ..ModelSpec::default_for(ModelKind::Cnn)
        };
        let m = Classifier::build(&spec).unwrap();
        // Conv biases start at zero, so ReLU passes zeros all the way to the head.
        let s = m.scores(&Tensor::zeros(&[2, 68, 8, 8])).unwrap();
        assert_eq!(s, vec![0.5, 0.5]);
        let expected = (68 * 9 + 1) * 32 + (32 * 9 + 1) * 16 + dense_params(16 * 4 * 4, 64) + dense_params(64, 1);
        assert_eq!(m.param_count(), expected);
    }

    #[test]
    fn threshold_convention() {
        assert_eq!(predict_label(0.49), Label::Real);
        assert_eq!(predict_label(0.51), Label::Fake);
        assert_eq!(predict_label(0.5), Label::Fake);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = ModelSpec::default_for(ModelKind::Cnn);
        s.resolution = 4;
        assert!(matches!(Classifier::build(&s), Err(ModelError::InvalidSpec(_))));
        let mut s = ModelSpec::default_for(ModelKind::Rnn);
        s.lstm_units.clear();
        assert!(matches!(Classifier::build(&s), Err(ModelError::InvalidSpec(_))));
        s = ModelSpec::default_for(ModelKind::Ann);
        s.dropout = 1.0;
        assert!(matches!(Classifier::build(&s), Err(ModelError::InvalidSpec(_))));
    }

    #[test]
    fn wrong_input_shape_is_a_shape_error() {
        let spec = ModelSpec {
            frames: 8,
            features: 6,
            ..ModelSpec::default_for(ModelKind::Rnn)
        };
        let m = Classifier::build(&spec).unwrap();
        assert!(matches!(m.scores(&Tensor::zeros(&[1, 8, 5])), Err(ModelError::Nn(NnError::ShapeMismatch(_)))));
        assert_eq!(m.scores(&Tensor::zeros(&[3, 8, 6])).unwrap().len(), 3);
    }

    #[test]
    fn checkpoint_round_trip_preserves_scores() {
        let spec = ModelSpec {
            frames: 8,
            features: 6,
            seed: 5,
            ..ModelSpec::default_for(ModelKind::Rnn)
        };
        let mut m = Classifier::build(&spec).unwrap();
        m.fit_input_standardization(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6], &[1.0, 2.0, 3.0, 0.5, 0.25, 0.0]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        m.save(&path).unwrap();
        let back = Classifier::load(&path).unwrap();
        assert_eq!(back, m);
        let x = crate::tensor_nn::grad_check::random_projection(&[4, 8, 6], 1);
        let (a, b) = (m.scores(&x).unwrap(), back.scores(&x).unwrap());
        assert!(a.iter().zip(&b).all(|(p, q)| p.to_bits() == q.to_bits()));
    }

    #[test]
    fn seed_controls_initialization() {
        let spec = ModelSpec::default_for(ModelKind::Rnn);
        let a = Classifier::build(&spec).unwrap();
        assert_eq!(a, Classifier::build(&spec).unwrap());
        let b = Classifier::build(&ModelSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a.network, b.network);
    }
}
