//! Long short-term memory layer.
//!
//! Gate pre-activations are packed as `[i | f | g | o]` along the last axis
//! of `w_x: [in, 4H]`, `w_h: [H, 4H]` and `bias: [4H]`:
//!
//! ```text
//! i, f, o = σ(x·Wx + h·Wh + b)     g = tanh(…)
//! c_t = f ⊙ c_{t-1} + i ⊙ g        h_t = o ⊙ tanh(c_t)
//! ```

use rand::Rng;

use super::activation::sigmoid_scalar;
use super::kernels::{matmul_a_bt_acc, matmul_acc, matmul_at_b_acc};
use super::network::{Cache, LayerState, Param};
use super::{glorot_limit, shape_err, NnError, Tensor};

/// Borrowed view of one cell's parameters.
#[derive(Debug, Clone, Copy)]
pub struct LstmParams<'a> {
    pub w_x: &'a Tensor,
    pub w_h: &'a Tensor,
    pub bias: &'a Tensor,
}

impl LstmParams<'_> {
    fn dims(&self) -> Result<(usize, usize), NnError> {
        let (fan_in, four_h) = self.w_x.dims2()?;
        if four_h % 4 != 0 {
            return Err(shape_err("lstm: w_x width must be a multiple of 4"));
        }
        let units = four_h / 4;
        if self.w_h.shape() != [units, four_h] || self.bias.shape() != [four_h] {
            return Err(shape_err(format!(
                "lstm: w_x {:?}, w_h {:?}, bias {:?}",
                self.w_x.shape(),
                self.w_h.shape(),
                self.bias.shape()
            )));
        }
        Ok((fan_in, units))
    }
}

/// Applies gate nonlinearities in place on one row of pre-activations `z`
/// and writes the new cell state, its tanh, and the hidden state.
#[inline]
fn activate_cell(z: &mut [f64], c_prev: &[f64], c: &mut [f64], tanh_c: &mut [f64], h: &mut [f64]) {
    let units = c_prev.len();
    for j in 0..units {
        let i = sigmoid_scalar(z[j]);
        let f = sigmoid_scalar(z[units + j]);
        let g = z[2 * units + j].tanh();
        let o = sigmoid_scalar(z[3 * units + j]);
        z[j] = i;
        z[units + j] = f;
        z[2 * units + j] = g;
        z[3 * units + j] = o;
        c[j] = f * c_prev[j] + i * g;
        tanh_c[j] = c[j].tanh();
        h[j] = o * tanh_c[j];
    }
}

/// One LSTM time step for a batch: returns `(h_t, c_t)`.
pub fn lstm_step(
    x_t: &Tensor,
    h_prev: &Tensor,
    c_prev: &Tensor,
    params: LstmParams<'_>,
) -> Result<(Tensor, Tensor), NnError> {
    let (fan_in, units) = params.dims()?;
    let (batch, x_in) = x_t.dims2()?;
    if x_in != fan_in || h_prev.shape() != [batch, units] || c_prev.shape() != [batch, units] {
        return Err(shape_err(format!(
            "lstm_step: x {:?}, h {:?}, c {:?} for {fan_in} inputs and {units} units",
            x_t.shape(),
            h_prev.shape(),
            c_prev.shape()
        )));
    }
    let four_h = 4 * units;
    let mut z = Vec::with_capacity(batch * four_h);
    for _ in 0..batch {
        z.extend_from_slice(params.bias.data());
    }
    matmul_acc(x_t.data(), params.w_x.data(), batch, fan_in, four_h, &mut z);
    matmul_acc(h_prev.data(), params.w_h.data(), batch, units, four_h, &mut z);
    let mut h = vec![0.0; batch * units];
    let mut c = vec![0.0; batch * units];
    let mut tanh_c = vec![0.0; units];
    for b in 0..batch {
        let rows = b * units..(b + 1) * units;
        activate_cell(
            &mut z[b * four_h..(b + 1) * four_h],
            &c_prev.data()[rows.clone()],
            &mut c[rows.clone()],
            &mut tanh_c,
            &mut h[rows],
        );
    }
    Ok((Tensor::new(vec![batch, units], h)?, Tensor::new(vec![batch, units], c)?))
}

/// Saved activations for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmCache {
    input: Tensor,
    batch: usize,
    steps: usize,
    /// `[T][B][4H]` post-activation gates.
    gates: Vec<f64>,
    /// `[T+1][B][H]`, index 0 is the zero initial state.
    cells: Vec<f64>,
    /// `[T][B][H]`.
    tanh_cells: Vec<f64>,
    /// `[T+1][B][H]`, index 0 is the zero initial state.
    hidden: Vec<f64>,
}

/// LSTM over `[batch, time, features]` starting from zero state.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub state: LayerState,
    /// Emit `[batch, time, units]` instead of the final `[batch, units]`.
    pub return_sequences: bool,
}

impl Lstm {
    /// Glorot-uniform weights; the forget-gate bias starts at 1.
    pub fn new<R: Rng + ?Sized>(fan_in: usize, units: usize, return_sequences: bool, rng: &mut R) -> Self {
        let w_x = Tensor::uniform(&[fan_in, 4 * units], glorot_limit(fan_in, 4 * units), rng);
        let w_h = Tensor::uniform(&[units, 4 * units], glorot_limit(units, 4 * units), rng);
        let mut bias = Tensor::zeros(&[4 * units]);
        bias.data_mut()[units..2 * units].fill(1.0);
        Self::from_params(w_x, w_h, bias, return_sequences).expect("consistent shapes")
    }

    pub fn from_params(w_x: Tensor, w_h: Tensor, bias: Tensor, return_sequences: bool) -> Result<Self, NnError> {
        LstmParams {
            w_x: &w_x,
            w_h: &w_h,
            bias: &bias,
        }
        .dims()?;
        Ok(Self {
            state: LayerState::new(vec![
                Param::new("w_x", w_x),
                Param::new("w_h", w_h),
                Param::new("bias", bias),
            ]),
            return_sequences,
        })
    }

    pub fn params(&self) -> LstmParams<'_> {
        LstmParams {
            w_x: &self.state.params[0].value,
            w_h: &self.state.params[1].value,
            bias: &self.state.params[2].value,
        }
    }

    pub fn units(&self) -> usize {
        self.state.params[1].value.shape()[0]
    }

    pub fn fan_in(&self) -> usize {
        self.state.params[0].value.shape()[0]
    }

    pub(crate) fn forward(&self, input: &Tensor) -> Result<(Tensor, Cache), NnError> {
        let (fan_in, units) = self.params().dims()?;
        let (batch, steps, features) = match input.shape() {
            &[b, t, f] => (b, t, f),
            s => return Err(shape_err(format!("lstm expects [batch, time, features], got {s:?}"))),
        };
        if features != fan_in {
            return Err(shape_err(format!("lstm expects {fan_in} features, got {features}")));
        }
        let four_h = 4 * units;
        let p = self.params();

        // Input projections for every (b, t) row at once: rows are b*T + t.
        let mut zx = Vec::with_capacity(batch * steps * four_h);
        for _ in 0..batch * steps {
            zx.extend_from_slice(p.bias.data());
        }
        matmul_acc(input.data(), p.w_x.data(), batch * steps, fan_in, four_h, &mut zx);

        let bh = batch * units;
        let mut gates = vec![0.0; steps * batch * four_h];
        let mut cells = vec![0.0; (steps + 1) * bh];
        let mut tanh_cells = vec![0.0; steps * bh];
        let mut hidden = vec![0.0; (steps + 1) * bh];
        let mut z = vec![0.0; batch * four_h];

        for t in 0..steps {
            for b in 0..batch {
                let src = (b * steps + t) * four_h;
                z[b * four_h..(b + 1) * four_h].copy_from_slice(&zx[src..src + four_h]);
            }
            matmul_acc(&hidden[t * bh..(t + 1) * bh], p.w_h.data(), batch, units, four_h, &mut z);
            let (c_done, c_next) = cells.split_at_mut((t + 1) * bh);
            let h_next = &mut hidden[(t + 1) * bh..];
            for b in 0..batch {
                let r = b * units..(b + 1) * units;
                activate_cell(
                    &mut z[b * four_h..(b + 1) * four_h],
                    &c_done[t * bh + r.start..t * bh + r.end],
                    &mut c_next[r.clone()],
                    &mut tanh_cells[t * bh + r.start..t * bh + r.end],
                    &mut h_next[r],
                );
            }
            gates[t * batch * four_h..(t + 1) * batch * four_h].copy_from_slice(&z);
        }

        let out = if self.return_sequences {
            let mut seq = vec![0.0; batch * steps * units];
            for t in 0..steps {
                for b in 0..batch {
                    let src = (t + 1) * bh + b * units;
                    let dst = (b * steps + t) * units;
                    seq[dst..dst + units].copy_from_slice(&hidden[src..src + units]);
                }
            }
            Tensor::new(vec![batch, steps, units], seq)?
        } else {
            Tensor::new(vec![batch, units], hidden[steps * bh..].to_vec())?
        };
        let cache = LstmCache {
            input: input.clone(),
            batch,
            steps,
            gates,
            cells,
            tanh_cells,
            hidden,
        };
        Ok((out, Cache::Lstm(cache)))
    }

    pub(crate) fn backward(
        &mut self,
        cache: &LstmCache,
        grad: &Tensor,
        need_input_grad: bool,
    ) -> Result<Option<Tensor>, NnError> {
        let units = self.units();
        let fan_in = self.fan_in();
        let (batch, steps) = (cache.batch, cache.steps);
        let expected: &[usize] = if self.return_sequences {
            &[batch, steps, units]
        } else {
            &[batch, units]
        };
        if grad.shape() != expected {
            return Err(shape_err(format!("lstm backward: gradient {:?}, expected {expected:?}", grad.shape())));
        }
        let four_h = 4 * units;
        let bh = batch * units;

        let mut dz_all = vec![0.0; batch * steps * four_h];
        let mut dz_t = vec![0.0; batch * four_h];
        let mut dh_next = vec![0.0; bh];
        let mut dc_next = vec![0.0; bh];
        let (w_h, bias) = match &mut self.state.params[..] {
            [_, w_h, bias] => (w_h, bias),
            _ => unreachable!("lstm holds three parameters"),
        };

        for t in (0..steps).rev() {
            if self.return_sequences {
                for b in 0..batch {
                    let src = (b * steps + t) * units;
                    for j in 0..units {
                        dh_next[b * units + j] += grad.data()[src + j];
                    }
                }
            } else if t == steps - 1 {
                for (d, g) in dh_next.iter_mut().zip(grad.data()) {
                    *d += g;
                }
            }
            for b in 0..batch {
                let gate = &cache.gates[(t * batch + b) * four_h..(t * batch + b + 1) * four_h];
                let dz = &mut dz_t[b * four_h..(b + 1) * four_h];
                for j in 0..units {
                    let k = b * units + j;
                    let (i, f, g, o) = (gate[j], gate[units + j], gate[2 * units + j], gate[3 * units + j]);
                    let tc = cache.tanh_cells[t * bh + k];
                    let c_prev = cache.cells[t * bh + k];
                    let dh = dh_next[k];
                    let d_o = dh * tc;
                    let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
                    dz[j] = dc * g * i * (1.0 - i);
                    dz[units + j] = dc * c_prev * f * (1.0 - f);
                    dz[2 * units + j] = dc * i * (1.0 - g * g);
                    dz[3 * units + j] = d_o * o * (1.0 - o);
                    dc_next[k] = dc * f;
                }
                let dst = (b * steps + t) * four_h;
                dz_all[dst..dst + four_h].copy_from_slice(dz);
            }
            let h_prev = &cache.hidden[t * bh..(t + 1) * bh];
            matmul_at_b_acc(h_prev, &dz_t, batch, units, four_h, w_h.grad.data_mut());
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            matmul_a_bt_acc(&dz_t, w_h.value.data(), batch, four_h, units, &mut dh_next);
        }

        let rows = batch * steps;
        {
            let db = bias.grad.data_mut();
            for row in dz_all.chunks_exact(four_h) {
                for (d, g) in db.iter_mut().zip(row) {
                    *d += g;
                }
            }
        }
        let w_x_grad = &mut self.state.params[0].grad;
        matmul_at_b_acc(cache.input.data(), &dz_all, rows, fan_in, four_h, w_x_grad.data_mut());
        if !need_input_grad {
            return Ok(None);
        }
        let mut dx = vec![0.0; rows * fan_in];
        let w_x = &self.state.params[0].value;
        matmul_a_bt_acc(&dz_all, w_x.data(), rows, four_h, fan_in, &mut dx);
        Tensor::new(vec![batch, steps, fan_in], dx).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn sig(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    /// Scalar-by-scalar reference cell, written independently of the batched kernel.
    fn reference_step(x: &[f64], h: &[f64], c: &[f64], wx: &Tensor, wh: &Tensor, b: &Tensor) -> (Vec<f64>, Vec<f64>) {
        let units = h.len();
        let n_in = x.len();
        let pre = |gate: usize, j: usize| {
            let col = gate * units + j;
            let mut s = b.data()[col];
            for k in 0..n_in {
                s += x[k] * wx.data()[k * 4 * units + col];
            }
            for k in 0..units {
                s += h[k] * wh.data()[k * 4 * units + col];
            }
            s
        };
        let mut h_out = vec![0.0; units];
        let mut c_out = vec![0.0; units];
        for j in 0..units {
            let i = sig(pre(0, j));
            let f = sig(pre(1, j));
            let g = pre(2, j).tanh();
            let o = sig(pre(3, j));
            c_out[j] = f * c[j] + i * g;
            h_out[j] = o * c_out[j].tanh();
        }
        (h_out, c_out)
    }

    #[test]
    fn zero_params_give_zero_state() {
        let p = (Tensor::zeros(&[3, 8]), Tensor::zeros(&[2, 8]), Tensor::zeros(&[8]));
        let params = LstmParams {
            w_x: &p.0,
            w_h: &p.1,
            bias: &p.2,
        };
        let (h, c) = lstm_step(&Tensor::zeros(&[1, 3]), &Tensor::zeros(&[1, 2]), &Tensor::zeros(&[1, 2]), params).unwrap();
        assert_eq!(h.data(), &[0.0, 0.0]);
        assert_eq!(c.data(), &[0.0, 0.0]);
    }

    #[test]
    fn saturated_forget_gate_keeps_cell() {
        let units = 2;
        let w_x = Tensor::zeros(&[3, 8]);
        let w_h = Tensor::zeros(&[2, 8]);
        let mut bias = Tensor::zeros(&[8]);
        bias.data_mut()[units..2 * units].fill(50.0);
        let params = LstmParams {
            w_x: &w_x,
            w_h: &w_h,
            bias: &bias,
        };
        let c_prev = Tensor::new(vec![1, 2], vec![0.7, -1.3]).unwrap();
        let x = Tensor::new(vec![1, 3], vec![0.3, -0.2, 0.9]).unwrap();
        let (_, c) = lstm_step(&x, &Tensor::zeros(&[1, 2]), &c_prev, params).unwrap();
        assert!(c.max_abs_diff(&c_prev) < 1e-6);
    }

    #[test]
    fn step_matches_scalar_reference() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let (batch, n_in, units) = (3, 4, 5);
        let wx = Tensor::uniform(&[n_in, 4 * units], 0.8, &mut rng);
        let wh = Tensor::uniform(&[units, 4 * units], 0.8, &mut rng);
        let b = Tensor::uniform(&[4 * units], 0.5, &mut rng);
        let x = Tensor::uniform(&[batch, n_in], 1.0, &mut rng);
        let h = Tensor::uniform(&[batch, units], 1.0, &mut rng);
        let c = Tensor::uniform(&[batch, units], 1.0, &mut rng);
        let params = LstmParams {
            w_x: &wx,
            w_h: &wh,
            bias: &b,
        };
        let (h1, c1) = lstm_step(&x, &h, &c, params).unwrap();
        for bi in 0..batch {
            let (rh, rc) = reference_step(
                &x.data()[bi * n_in..(bi + 1) * n_in],
                &h.data()[bi * units..(bi + 1) * units],
                &c.data()[bi * units..(bi + 1) * units],
                &wx,
                &wh,
                &b,
            );
            for j in 0..units {
                assert!((h1.data()[bi * units + j] - rh[j]).abs() < 1e-12);
                assert!((c1.data()[bi * units + j] - rc[j]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn layer_forward_equals_repeated_steps() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (batch, steps, n_in, units) = (2, 4, 3, 3);
        let layer = Lstm::new(n_in, units, true, &mut rng);
        let x = Tensor::uniform(&[batch, steps, n_in], 1.0, &mut rng);
        let (seq, _) = layer.forward(&x).unwrap();
        let mut h = Tensor::zeros(&[batch, units]);
        let mut c = Tensor::zeros(&[batch, units]);
        for t in 0..steps {
            let mut xt = Vec::new();
            for b in 0..batch {
                xt.extend_from_slice(&x.data()[(b * steps + t) * n_in..(b * steps + t + 1) * n_in]);
            }
            let xt = Tensor::new(vec![batch, n_in], xt).unwrap();
            (h, c) = lstm_step(&xt, &h, &c, layer.params()).unwrap();
            for b in 0..batch {
                for j in 0..units {
                    let got = seq.data()[(b * steps + t) * units + j];
                    assert!((got - h.data()[b * units + j]).abs() < 1e-12);
                }
            }
        }
    }
}
