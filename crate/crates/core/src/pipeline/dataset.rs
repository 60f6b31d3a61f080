//! Model-ready samples drawn from segments.
//!
//! ANN and RNN samples are whole segments. CNN samples are splices: sample
//! `i` is splice `i % s` of segment `i / s`, rasterized on demand so that a
//! full image set never has to sit in memory.

use super::PipelineError;
use crate::landmark_data::{Label, NUM_POINTS};
use crate::models::{ModelKind, ModelSpec};
use crate::preprocess::{Segment, FEATURE_COLUMNS};
use crate::raster::{splice_image, splice_ranges, RasterConfig};
use crate::tensor_nn::Tensor;

#[derive(Debug, Clone)]
pub struct Dataset<'a> {
    kind: ModelKind,
    segments: Vec<&'a Segment>,
    raster: RasterConfig,
    /// Root of the per-splice noise seeds; `None` keeps images clean.
    noise_root: Option<u64>,
    splices: usize,
}

impl<'a> Dataset<'a> {
    pub fn new(
        spec: &ModelSpec,
        segments: Vec<&'a Segment>,
        raster: RasterConfig,
        noise_root: Option<u64>,
    ) -> Result<Self, PipelineError> {
        let frames = segments.first().map_or(spec.frames, |s| s.frames);
        if let Some(s) = segments.iter().find(|s| s.frames != frames || s.features.len() != frames * FEATURE_COLUMNS) {
            return Err(PipelineError::Shape(format!("segment {} does not match the corpus layout", s.id())));
        }
        match spec.kind {
            ModelKind::Ann | ModelKind::Rnn if !segments.is_empty() && (frames != spec.frames || spec.features != FEATURE_COLUMNS) => {
                return Err(PipelineError::Shape(format!(
                    "model expects {} frames x {} features, segments have {frames} x {}",
                    spec.frames,
                    spec.features,
                    FEATURE_COLUMNS
                )));
            }
            ModelKind::Cnn if raster.resolution != spec.resolution => {
                return Err(PipelineError::Shape(format!(
                    "model expects {0}x{0} images, raster resolution is {1}",
                    spec.resolution, raster.resolution
                )));
            }
            _ => {}
        }
        let splices = match spec.kind {
            ModelKind::Cnn => splice_ranges(frames).len(),
            _ => 1,
        };
        if splices == 0 {
            return Err(PipelineError::Shape(format!("{frames}-frame segments hold no full splice")));
        }
        Ok(Self {
            kind: spec.kind,
            segments,
            raster,
            noise_root,
            splices,
        })
    }

    pub fn len(&self) -> usize {
        self.segments.len() * self.splices
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn label(&self, i: usize) -> Label {
        self.segments[i / self.splices].label
    }

    pub fn labels(&self) -> Vec<Label> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }

    /// Source video of sample `i`.
    pub fn video_id(&self, i: usize) -> &str {
        &self.segments[i / self.splices].source_video_id
    }

    /// Stacks the requested samples into one input tensor.
    pub fn batch(&self, indices: &[usize]) -> Result<Tensor, PipelineError> {
        assert!(!indices.is_empty(), "empty batch");
        let first = self.segments[0];
        match self.kind {
            ModelKind::Ann | ModelKind::Rnn => {
                let width = first.features.len();
                let mut data = Vec::with_capacity(indices.len() * width);
                for &i in indices {
                    data.extend_from_slice(&self.segments[i].features);
                }
                let shape = match self.kind {
                    ModelKind::Ann => vec![indices.len(), width],
                    _ => vec![indices.len(), first.frames, FEATURE_COLUMNS],
                };
                Ok(Tensor::new(shape, data)?)
            }
            ModelKind::Cnn => {
                let r = self.raster.resolution;
                let mut data = Vec::with_capacity(indices.len() * NUM_POINTS * r * r);
                let mut channels = 0;
                for &i in indices {
                    let img = splice_image(self.segments[i / self.splices], i % self.splices, &self.raster, self.noise_root)?;
                    channels = img.pixels.shape()[0];
                    data.extend_from_slice(img.pixels.data());
                }
                Ok(Tensor::new(vec![indices.len(), channels, r, r], data)?)
            }
        }
    }

    /// Per-column mean and population standard deviation of the feature
    /// rows of every segment, `FEATURE_COLUMNS` entries each.
    pub fn feature_moments(&self) -> (Vec<f64>, Vec<f64>) {
        let mut sum = vec![0.0; FEATURE_COLUMNS];
        let mut rows = 0usize;
        for s in &self.segments {
            for row in s.features.chunks_exact(FEATURE_COLUMNS) {
                for (acc, v) in sum.iter_mut().zip(row) {
                    *acc += v;
                }
                rows += 1;
            }
        }
        let n = rows.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let mut sq = vec![0.0; FEATURE_COLUMNS];
        for s in &self.segments {
            for row in s.features.chunks_exact(FEATURE_COLUMNS) {
                for ((acc, v), m) in sq.iter_mut().zip(row).zip(&mean) {
                    *acc += (v - m) * (v - m);
                }
            }
        }
        (mean, sq.iter().map(|s| (s / n).sqrt()).collect())
    }

    pub fn targets(&self, indices: &[usize]) -> Tensor {
        let data = indices.iter().map(|&i| self.label(i).as_f64()).collect();
        Tensor::new(vec![indices.len(), 1], data).expect("non-empty batch")
    }
}
