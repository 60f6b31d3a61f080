//! Fixed per-feature affine input normalization `y = (x - mean) * scale`.
//!
//! Feature `j` of the statistics applies to every input element whose flat
//! index is congruent to `j` modulo the feature count, so one set of
//! statistics serves `[B, F]`, `[B, T, F]` and `[B, T * F]` layouts alike.
//! The statistics are buffers, not trainable parameters.

use super::network::Cache;
use super::{shape_err, NnError, Tensor};

/// Standard deviations below this are treated as this value.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Standardize {
    pub mean: Tensor,
    pub scale: Tensor,
}

impl Standardize {
    pub fn identity(features: usize) -> Self {
        Self {
            mean: Tensor::zeros(&[features]),
            scale: Tensor::filled(&[features], 1.0),
        }
    }

    pub fn features(&self) -> usize {
        self.mean.len()
    }

    /// Sets the statistics from per-feature means and standard deviations.
    pub fn fit(&mut self, mean: &[f64], std: &[f64]) -> Result<(), NnError> {
        if mean.len() != self.features() || std.len() != self.features() {
            return Err(shape_err(format!("standardize expects {} features", self.features())));
        }
        self.mean.data_mut().copy_from_slice(mean);
        for (s, &sd) in self.scale.data_mut().iter_mut().zip(std) {
            *s = 1.0 / sd.max(STD_FLOOR);
        }
        Ok(())
    }

    fn check(&self, x: &Tensor) -> Result<(), NnError> {
        if !x.len().is_multiple_of(self.features()) || x.shape().last().is_some_and(|&d| d % self.features() != 0) {
            return Err(shape_err(format!(
                "standardize over {} features cannot cover {:?}",
                self.features(),
                x.shape()
            )));
        }
        Ok(())
    }

    pub(crate) fn forward(&self, x: &Tensor) -> Result<(Tensor, Cache), NnError> {
        self.check(x)?;
        let (mean, scale) = (self.mean.data(), self.scale.data());
        let f = self.features();
        let data = x.data().iter().enumerate().map(|(i, &v)| (v - mean[i % f]) * scale[i % f]).collect();
        Ok((Tensor::new(x.shape().to_vec(), data)?, Cache::Shape(x.shape().to_vec())))
    }

    pub(crate) fn backward(&self, grad: &Tensor) -> Result<Tensor, NnError> {
        self.check(grad)?;
        let scale = self.scale.data();
        let f = self.features();
        let data = grad.data().iter().enumerate().map(|(i, &g)| g * scale[i % f]).collect();
        Tensor::new(grad.shape().to_vec(), data)
    }
}
