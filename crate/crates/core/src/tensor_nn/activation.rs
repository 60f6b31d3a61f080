use super::network::Cache;
use super::{shape_err, NnError, Tensor};

/// Logistic function evaluated without overflow for large `|x|`.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| v.max(0.0))
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(f64::tanh)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActivationKind {
    Relu,
    Sigmoid,
    Tanh,
}

impl ActivationKind {
    pub fn name(self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Sigmoid => "sigmoid",
            ActivationKind::Tanh => "tanh",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Activation {
    pub kind: ActivationKind,
}

impl Activation {
    pub fn new(kind: ActivationKind) -> Self {
        Self { kind }
    }

    pub(crate) fn forward(&self, x: &Tensor) -> (Tensor, Cache) {
        match self.kind {
            ActivationKind::Relu => (relu(x), Cache::Input(x.clone())),
            ActivationKind::Sigmoid => {
                let y = sigmoid(x);
                (y.clone(), Cache::Output(y))
            }
            ActivationKind::Tanh => {
                let y = tanh(x);
                (y.clone(), Cache::Output(y))
            }
        }
    }

    pub(crate) fn backward(&self, cache: &Cache, grad: &Tensor) -> Result<Tensor, NnError> {
        let (saved, f): (&Tensor, fn(f64) -> f64) = match (self.kind, cache) {
            (ActivationKind::Relu, Cache::Input(x)) => (x, |x| if x > 0.0 { 1.0 } else { 0.0 }),
            (ActivationKind::Sigmoid, Cache::Output(y)) => (y, |y| y * (1.0 - y)),
            (ActivationKind::Tanh, Cache::Output(y)) => (y, |y| 1.0 - y * y),
            _ => return Err(shape_err("activation cache mismatch")),
        };
        if saved.shape() != grad.shape() {
            return Err(shape_err(format!(
                "{} backward: gradient {:?} vs activation {:?}",
                self.kind.name(),
                grad.shape(),
                saved.shape()
            )));
        }
        let data = saved.data().iter().zip(grad.data()).map(|(&s, &g)| g * f(s)).collect();
        Tensor::new(saved.shape().to_vec(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_contracts() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        assert_eq!(sigmoid_scalar(-1000.0), 0.0);
        assert_eq!(sigmoid_scalar(1000.0), 1.0);
        assert!(sigmoid_scalar(-745.0).is_finite());
        let r = relu(&Tensor::from_vec(vec![-3.0, 3.0, 0.0]));
        assert_eq!(r.data(), &[0.0, 3.0, 0.0]);
        let t = tanh(&Tensor::from_vec(vec![0.0, 20.0]));
        assert_eq!(t.data()[0], 0.0);
        assert!((t.data()[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_is_symmetric() {
        for &x in &[0.1, 1.0, 5.0, 30.0] {
            assert!((sigmoid_scalar(x) + sigmoid_scalar(-x) - 1.0).abs() < 1e-15);
        }
    }
}
