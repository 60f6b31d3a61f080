use rand::Rng;

use super::network::{Cache, Mode};
use super::{shape_err, NnError, Tensor};

fn check_rate(rate: f64) -> Result<(), NnError> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(NnError::InvalidRate(rate))
    }
}

/// Inverted-dropout mask: 0 with probability `rate`, else `1 / (1 - rate)`.
fn mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

/// Stateless inverted dropout; identity when `training` is false or `rate` is 0.
pub fn dropout(input: &Tensor, rate: f64, seed: u64, training: bool) -> Result<Tensor, NnError> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(input.clone());
    }
    let m = mask(input.len(), rate, &mut crate::seed::rng(seed));
    let data = input.data().iter().zip(&m).map(|(x, k)| x * k).collect();
    Tensor::new(input.shape().to_vec(), data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dropout {
    pub rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self, NnError> {
        check_rate(rate)?;
        Ok(Self { rate })
    }

    pub(crate) fn forward(&self, input: &Tensor, mode: &mut Mode<'_>) -> Result<(Tensor, Cache), NnError> {
        match mode {
            Mode::Train(rng) if self.rate > 0.0 => {
                let m = mask(input.len(), self.rate, *rng);
                let data = input.data().iter().zip(&m).map(|(x, k)| x * k).collect();
                Ok((Tensor::new(input.shape().to_vec(), data)?, Cache::Mask(Some(m))))
            }
            _ => Ok((input.clone(), Cache::Mask(None))),
        }
    }

    pub(crate) fn backward(&self, mask: Option<&[f64]>, grad: &Tensor) -> Result<Tensor, NnError> {
        match mask {
            None => Ok(grad.clone()),
            Some(m) if m.len() == grad.len() => {
                let data = grad.data().iter().zip(m).map(|(g, k)| g * k).collect();
                Tensor::new(grad.shape().to_vec(), data)
            }
            Some(_) => Err(shape_err("dropout mask does not match gradient")),
        }
    }
}
