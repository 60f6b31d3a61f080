use rand_chacha::ChaCha8Rng;

use super::activation::{Activation, ActivationKind};
use super::conv::{Conv2d, ConvCache};
use super::dense::Dense;
use super::dropout::Dropout;
use super::lstm::{Lstm, LstmCache};
use super::standardize::Standardize;
use super::{shape_err, NnError, Tensor};

/// A trainable tensor with its gradient accumulator and Adam moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
    pub m: Tensor,
    pub v: Tensor,
}

impl Param {
    pub fn new(name: impl Into<String>, value: Tensor) -> Self {
        let shape = value.shape().to_vec();
        Self {
            name: name.into(),
            grad: Tensor::zeros(&shape),
            m: Tensor::zeros(&shape),
            v: Tensor::zeros(&shape),
            value,
        }
    }
}

/// Parameters of one layer plus the optimizer step counter.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LayerState {
    pub params: Vec<Param>,
    pub step: u64,
}

impl LayerState {
    pub fn new(params: Vec<Param>) -> Self {
        Self { params, step: 0 }
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn param(&self, name: &str) -> &Param {
        self.params
            .iter()
            .find(|p| p.name == name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
    }

    pub fn param_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }
}

/// Forward-pass mode. Training carries the RNG that drives dropout masks.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

impl Mode<'_> {
    pub fn is_training(&self) -> bool {
        matches!(self, Mode::Train(_))
    }
}

/// Values saved by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub enum Cache {
    Input(Tensor),
    Output(Tensor),
    Lstm(LstmCache),
    Conv(ConvCache),
    Mask(Option<Vec<f64>>),
    Shape(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Dense(Dense),
    Lstm(Lstm),
    Conv2d(Conv2d),
    Activation(Activation),
    Dropout(Dropout),
    /// Fixed input normalization; its statistics are buffers, not parameters.
    Standardize(Standardize),
    /// Collapses every non-batch axis.
    Flatten,
}

impl Layer {
    pub fn relu() -> Layer {
        Layer::Activation(Activation::new(ActivationKind::Relu))
    }

    pub fn sigmoid() -> Layer {
        Layer::Activation(Activation::new(ActivationKind::Sigmoid))
    }

    pub fn tanh() -> Layer {
        Layer::Activation(Activation::new(ActivationKind::Tanh))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::Dense(_) => "dense",
            Layer::Lstm(_) => "lstm",
            Layer::Conv2d(_) => "conv2d",
            Layer::Activation(a) => a.kind.name(),
            Layer::Dropout(_) => "dropout",
            Layer::Standardize(_) => "standardize",
            Layer::Flatten => "flatten",
        }
    }

    pub fn forward(&self, input: &Tensor, mode: &mut Mode<'_>) -> Result<(Tensor, Cache), NnError> {
        match self {
            Layer::Dense(l) => l.forward(input),
            Layer::Lstm(l) => l.forward(input),
            Layer::Conv2d(l) => l.forward(input),
            Layer::Activation(l) => Ok(l.forward(input)),
            Layer::Dropout(l) => l.forward(input, mode),
            Layer::Standardize(l) => l.forward(input),
            Layer::Flatten => {
                let shape = input.shape().to_vec();
                if shape.len() < 2 {
                    return Err(shape_err("flatten needs a batch axis plus at least one more"));
                }
                let rest: usize = shape[1..].iter().product();
                let out = input.clone().reshape(vec![shape[0], rest])?;
                Ok((out, Cache::Shape(shape)))
            }
        }
    }

    /// Accumulates parameter gradients and returns the input gradient, or
    /// `None` when `need_input_grad` is false.
    pub fn backward(
        &mut self,
        cache: &Cache,
        grad_output: &Tensor,
        need_input_grad: bool,
    ) -> Result<Option<Tensor>, NnError> {
        match (self, cache) {
            (Layer::Dense(l), Cache::Input(x)) => l.backward(x, grad_output, need_input_grad),
            (Layer::Lstm(l), Cache::Lstm(c)) => l.backward(c, grad_output, need_input_grad),
            (Layer::Conv2d(l), Cache::Conv(c)) => l.backward(c, grad_output, need_input_grad),
            (Layer::Activation(l), c) => l.backward(c, grad_output).map(Some),
            (Layer::Dropout(l), Cache::Mask(mask)) => l.backward(mask.as_deref(), grad_output).map(Some),
            (Layer::Standardize(l), Cache::Shape(_)) => l.backward(grad_output).map(Some),
            (Layer::Flatten, Cache::Shape(shape)) => grad_output.clone().reshape(shape.clone()).map(Some),
            (layer, _) => Err(shape_err(format!("cache does not belong to a {} layer", layer.kind_name()))),
        }
    }

    pub fn state(&self) -> Option<&LayerState> {
        match self {
            Layer::Dense(l) => Some(&l.state),
            Layer::Lstm(l) => Some(&l.state),
            Layer::Conv2d(l) => Some(&l.state),
            _ => None,
        }
    }

    pub fn state_mut(&mut self) -> Option<&mut LayerState> {
        match self {
            Layer::Dense(l) => Some(&mut l.state),
            Layer::Lstm(l) => Some(&mut l.state),
            Layer::Conv2d(l) => Some(&mut l.state),
            _ => None,
        }
    }
}

/// A sequential stack of layers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Self { layers }
    }

    pub fn forward(&self, input: &Tensor, mode: &mut Mode<'_>) -> Result<(Tensor, Vec<Cache>), NnError> {
        let mut caches = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (y, cache) = layer.forward(&x, mode)?;
            caches.push(cache);
            x = y;
        }
        Ok((x, caches))
    }

    /// Forward pass without keeping caches.
    pub fn infer(&self, input: &Tensor) -> Result<Tensor, NnError> {
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.forward(&x, &mut Mode::Eval)?.0;
        }
        Ok(x)
    }

    /// Backpropagates `grad_output` through every layer. Returns the input
    /// gradient when `need_input_grad` is set.
    pub fn backward(
        &mut self,
        caches: &[Cache],
        grad_output: &Tensor,
        need_input_grad: bool,
    ) -> Result<Option<Tensor>, NnError> {
        if caches.len() != self.layers.len() {
            return Err(shape_err("one cache per layer is required"));
        }
        // Layers in front of the first parametrized layer never need an input gradient.
        let first_param_layer = self.layers.iter().position(|l| l.state().is_some()).unwrap_or(0);
        let mut grad = grad_output.clone();
        for (idx, (layer, cache)) in self.layers.iter_mut().zip(caches).enumerate().rev() {
            let needed = need_input_grad || idx > first_param_layer;
            match layer.backward(cache, &grad, needed)? {
                Some(g) => grad = g,
                None => return Ok(None),
            }
        }
        Ok(Some(grad))
    }

    pub fn zero_grad(&mut self) {
        self.states_mut().for_each(LayerState::zero_grad);
    }

    pub fn states(&self) -> impl Iterator<Item = &LayerState> {
        self.layers.iter().filter_map(Layer::state)
    }

    pub fn states_mut(&mut self) -> impl Iterator<Item = &mut LayerState> {
        self.layers.iter_mut().filter_map(Layer::state_mut)
    }

    pub fn param_count(&self) -> usize {
        self.states().map(LayerState::param_count).sum()
    }

    /// `(qualified_name, value)` for every parameter, e.g. `"3.weight"`.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if let Some(state) = layer.state() {
                for p in &state.params {
                    out.push((format!("{i}.{}", p.name), &p.value));
                }
            }
        }
        out
    }

    /// `(qualified_name, tensor)` for every non-trainable buffer, e.g. `"0.mean"`.
    pub fn named_buffers(&self) -> Vec<(String, &Tensor)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if let Layer::Standardize(s) = layer {
                out.push((format!("{i}.mean"), &s.mean));
                out.push((format!("{i}.scale"), &s.scale));
            }
        }
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out = Vec::new();
        for layer in &mut self.layers {
            if let Layer::Standardize(s) = layer {
                out.push(&mut s.mean);
                out.push(&mut s.scale);
            }
        }
        out
    }

    /// Copies parameter values only; moments and gradients are untouched.
    pub fn param_values(&self) -> Vec<Tensor> {
        self.states()
            .flat_map(|s| s.params.iter().map(|p| p.value.clone()))
            .collect()
    }

    pub fn set_param_values(&mut self, values: &[Tensor]) -> Result<(), NnError> {
        let mut it = values.iter();
        for state in self.states_mut() {
            for p in &mut state.params {
                let v = it.next().ok_or_else(|| shape_err("too few parameter tensors"))?;
                if v.shape() != p.value.shape() {
                    return Err(shape_err(format!(
                        "parameter {} expects {:?}, got {:?}",
                        p.name,
                        p.value.shape(),
                        v.shape()
                    )));
                }
                p.value = v.clone();
            }
        }
        if it.next().is_some() {
            return Err(shape_err("too many parameter tensors"));
        }
        Ok(())
    }

    /// All parameter values concatenated in layer order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.states()
            .flat_map(|s| s.params.iter().flat_map(|p| p.value.data().iter().copied()))
            .collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.states()
            .flat_map(|s| s.params.iter().flat_map(|p| p.grad.data().iter().copied()))
            .collect()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) {
        let mut offset = 0;
        for state in self.states_mut() {
            for p in &mut state.params {
                let n = p.value.len();
                p.value.data_mut().copy_from_slice(&flat[offset..offset + n]);
                offset += n;
            }
        }
        assert_eq!(offset, flat.len(), "flat parameter vector length");
    }
}
