use rand::Rng;

use super::kernels::{matmul_a_bt_acc, matmul_acc, matmul_at_b_acc};
use super::network::{Cache, LayerState, Param};
use super::{glorot_limit, shape_err, NnError, Tensor};

/// `out[b, j] = Σ_i input[b, i] · weights[i, j] + bias[j]`.
pub fn dense_forward(input: &Tensor, weights: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let (batch, fan_in) = input.dims2()?;
    let (w_in, fan_out) = weights.dims2()?;
    if w_in != fan_in || bias.shape() != [fan_out] {
        return Err(shape_err(format!(
            "dense: input {:?}, weights {:?}, bias {:?}",
            input.shape(),
            weights.shape(),
            bias.shape()
        )));
    }
    let mut out = Vec::with_capacity(batch * fan_out);
    for _ in 0..batch {
        out.extend_from_slice(bias.data());
    }
    matmul_acc(input.data(), weights.data(), batch, fan_in, fan_out, &mut out);
    Tensor::new(vec![batch, fan_out], out)
}

/// Fully connected layer with `weight: [in, out]` and `bias: [out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub state: LayerState,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let w = Tensor::uniform(&[fan_in, fan_out], glorot_limit(fan_in, fan_out), rng);
        Self::from_params(w, Tensor::zeros(&[fan_out])).expect("consistent shapes")
    }

    pub fn from_params(weight: Tensor, bias: Tensor) -> Result<Self, NnError> {
        let (_, out) = weight.dims2()?;
        if bias.shape() != [out] {
            return Err(shape_err("dense bias must match the output width"));
        }
        Ok(Self {
            state: LayerState::new(vec![Param::new("weight", weight), Param::new("bias", bias)]),
        })
    }

    pub fn fan_in(&self) -> usize {
        self.state.params[0].value.shape()[0]
    }

    pub fn fan_out(&self) -> usize {
        self.state.params[0].value.shape()[1]
    }

    pub(crate) fn forward(&self, input: &Tensor) -> Result<(Tensor, Cache), NnError> {
        let out = dense_forward(input, &self.state.params[0].value, &self.state.params[1].value)?;
        Ok((out, Cache::Input(input.clone())))
    }

    pub(crate) fn backward(
        &mut self,
        input: &Tensor,
        grad: &Tensor,
        need_input_grad: bool,
    ) -> Result<Option<Tensor>, NnError> {
        let (batch, fan_in) = input.dims2()?;
        let fan_out = self.fan_out();
        if grad.shape() != [batch, fan_out] {
            return Err(shape_err(format!("dense backward: gradient {:?}", grad.shape())));
        }
        let (w, rest) = self.state.params.split_at_mut(1);
        let (w, b) = (&mut w[0], &mut rest[0]);
        matmul_at_b_acc(input.data(), grad.data(), batch, fan_in, fan_out, w.grad.data_mut());
        let db = b.grad.data_mut();
        for row in grad.data().chunks_exact(fan_out) {
            for (d, g) in db.iter_mut().zip(row) {
                *d += g;
            }
        }
        if !need_input_grad {
            return Ok(None);
        }
        let mut dx = vec![0.0; batch * fan_in];
        matmul_a_bt_acc(grad.data(), w.value.data(), batch, fan_out, fan_in, &mut dx);
        Tensor::new(vec![batch, fan_in], dx).map(Some)
    }
}
