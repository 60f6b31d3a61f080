//! Valid (no padding), stride-1 2-D cross-correlation via im2col.

use rand::Rng;

use super::kernels::{matmul_a_bt_acc, matmul_acc, matmul_at_b_acc};
use super::network::{Cache, LayerState, Param};
use super::{glorot_limit, shape_err, NnError, Tensor};

#[derive(Debug, Clone, Copy)]
struct Geometry {
    c_in: usize,
    h: usize,
    w: usize,
    c_out: usize,
    k: usize,
    h_out: usize,
    w_out: usize,
}

impl Geometry {
    fn new(input: &[usize], kernels: &[usize]) -> Result<(usize, Geometry), NnError> {
        let (batch, c_in, h, w) = match *input {
            [b, c, h, w] => (b, c, h, w),
            _ => return Err(shape_err(format!("conv2d expects [batch, C, H, W], got {input:?}"))),
        };
        let (c_out, kc, k) = match *kernels {
            [o, c, kh, kw] if kh == kw => (o, c, kh),
            _ => return Err(shape_err(format!("conv2d expects square kernels [C_out, C_in, k, k], got {kernels:?}"))),
        };
        if kc != c_in {
            return Err(shape_err(format!("conv2d: input has {c_in} channels, kernels expect {kc}")));
        }
        if k > h || k > w {
            return Err(shape_err(format!("conv2d: kernel {k} larger than image {h}x{w}")));
        }
        Ok((
            batch,
            Geometry {
                c_in,
                h,
                w,
                c_out,
                k,
                h_out: h - k + 1,
                w_out: w - k + 1,
            },
        ))
    }

    fn patch(&self) -> usize {
        self.c_in * self.k * self.k
    }

    fn out_pixels(&self) -> usize {
        self.h_out * self.w_out
    }

    /// `cols[(c, ky, kx), (oy, ox)] = x[c, oy + ky, ox + kx]`.
    fn im2col(&self, x: &[f64], cols: &mut [f64]) {
        let hw = self.out_pixels();
        for c in 0..self.c_in {
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = (c * self.k + ky) * self.k + kx;
                    let dst = &mut cols[row * hw..(row + 1) * hw];
                    for oy in 0..self.h_out {
                        let src = c * self.h * self.w + (oy + ky) * self.w + kx;
                        dst[oy * self.w_out..(oy + 1) * self.w_out].copy_from_slice(&x[src..src + self.w_out]);
                    }
                }
            }
        }
    }

    fn col2im_add(&self, cols: &[f64], dx: &mut [f64]) {
        let hw = self.out_pixels();
        for c in 0..self.c_in {
            for ky in 0..self.k {
                for kx in 0..self.k {
                    let row = (c * self.k + ky) * self.k + kx;
                    let src = &cols[row * hw..(row + 1) * hw];
                    for oy in 0..self.h_out {
                        let base = c * self.h * self.w + (oy + ky) * self.w + kx;
                        for (d, s) in dx[base..base + self.w_out].iter_mut().zip(&src[oy * self.w_out..(oy + 1) * self.w_out]) {
                            *d += s;
                        }
                    }
                }
            }
        }
    }
}

/// `out[b, o, y, x] = bias[o] + Σ_{c, ky, kx} input[b, c, y + ky, x + kx] · kernels[o, c, ky, kx]`.
pub fn conv2d_forward(input: &Tensor, kernels: &Tensor, bias: &Tensor) -> Result<Tensor, NnError> {
    let (batch, g) = Geometry::new(input.shape(), kernels.shape())?;
    if bias.shape() != [g.c_out] {
        return Err(shape_err(format!("conv2d bias {:?} for {} output channels", bias.shape(), g.c_out)));
    }
    let (patch, hw) = (g.patch(), g.out_pixels());
    let in_size = g.c_in * g.h * g.w;
    let out_size = g.c_out * hw;
    let mut out = vec![0.0; batch * out_size];
    let mut cols = vec![0.0; patch * hw];
    for b in 0..batch {
        g.im2col(&input.data()[b * in_size..(b + 1) * in_size], &mut cols);
        let ob = &mut out[b * out_size..(b + 1) * out_size];
        for (o, row) in ob.chunks_exact_mut(hw).enumerate() {
            row.fill(bias.data()[o]);
        }
        matmul_acc(kernels.data(), &cols, g.c_out, patch, hw, ob);
    }
    Tensor::new(vec![batch, g.c_out, g.h_out, g.w_out], out)
}

#[derive(Debug, Clone)]
pub struct ConvCache {
    input: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub state: LayerState,
}

impl Conv2d {
    /// Glorot-uniform kernels with `fan_in = C_in·k²`, `fan_out = C_out·k²`; zero bias.
    pub fn new<R: Rng + ?Sized>(c_in: usize, c_out: usize, k: usize, rng: &mut R) -> Self {
        let limit = glorot_limit(c_in * k * k, c_out * k * k);
        let kernels = Tensor::uniform(&[c_out, c_in, k, k], limit, rng);
        Self::from_params(kernels, Tensor::zeros(&[c_out])).expect("consistent shapes")
    }

    pub fn from_params(kernels: Tensor, bias: Tensor) -> Result<Self, NnError> {
        match kernels.shape() {
            &[o, _, kh, kw] if kh == kw && bias.shape() == [o] => {}
            _ => return Err(shape_err("conv2d kernels [C_out, C_in, k, k] with bias [C_out]")),
        }
        Ok(Self {
            state: LayerState::new(vec![Param::new("kernels", kernels), Param::new("bias", bias)]),
        })
    }

    pub fn kernel_shape(&self) -> &[usize] {
        self.state.params[0].value.shape()
    }

    pub(crate) fn forward(&self, input: &Tensor) -> Result<(Tensor, Cache), NnError> {
        let out = conv2d_forward(input, &self.state.params[0].value, &self.state.params[1].value)?;
        Ok((out, Cache::Conv(ConvCache { input: input.clone() })))
    }

    pub(crate) fn backward(
        &mut self,
        cache: &ConvCache,
        grad: &Tensor,
        need_input_grad: bool,
    ) -> Result<Option<Tensor>, NnError> {
        let kshape = self.kernel_shape().to_vec();
        let (batch, g) = Geometry::new(cache.input.shape(), &kshape)?;
        if grad.shape() != [batch, g.c_out, g.h_out, g.w_out] {
            return Err(shape_err(format!("conv2d backward: gradient {:?}", grad.shape())));
        }
        let (patch, hw) = (g.patch(), g.out_pixels());
        let in_size = g.c_in * g.h * g.w;
        let out_size = g.c_out * hw;
        let (kp, bp) = match &mut self.state.params[..] {
            [k, b] => (k, b),
            _ => unreachable!("conv2d holds two parameters"),
        };
        let mut cols = vec![0.0; patch * hw];
        let mut dcols = vec![0.0; patch * hw];
        let mut dx = if need_input_grad { vec![0.0; batch * in_size] } else { Vec::new() };
        for b in 0..batch {
            let gb = &grad.data()[b * out_size..(b + 1) * out_size];
            g.im2col(&cache.input.data()[b * in_size..(b + 1) * in_size], &mut cols);
            matmul_a_bt_acc(gb, &cols, g.c_out, hw, patch, kp.grad.data_mut());
            for (o, row) in gb.chunks_exact(hw).enumerate() {
                bp.grad.data_mut()[o] += row.iter().sum::<f64>();
            }
            if need_input_grad {
                dcols.fill(0.0);
                matmul_at_b_acc(kp.value.data(), gb, g.c_out, patch, hw, &mut dcols);
                g.col2im_add(&dcols, &mut dx[b * in_size..(b + 1) * in_size]);
            }
        }
        if !need_input_grad {
            return Ok(None);
        }
        Tensor::new(cache.input.shape().to_vec(), dx).map(Some)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn unit_kernel_is_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::uniform(&[2, 1, 4, 5], 1.0, &mut rng);
        let out = conv2d_forward(&x, &Tensor::filled(&[1, 1, 1, 1], 1.0), &Tensor::zeros(&[1])).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn ones_kernel_on_constant_image() {
        let x = Tensor::filled(&[1, 1, 6, 6], 2.5);
        let out = conv2d_forward(&x, &Tensor::filled(&[1, 1, 3, 3], 1.0), &Tensor::zeros(&[1])).unwrap();
        assert_eq!(out.shape(), &[1, 1, 4, 4]);
        assert!(out.data().iter().all(|&v| (v - 22.5).abs() < 1e-12));
    }

    #[test]
    fn matches_direct_summation() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let (b, ci, h, w, co, k) = (2, 3, 6, 5, 4, 3);
        let x = Tensor::uniform(&[b, ci, h, w], 1.0, &mut rng);
        let kern = Tensor::uniform(&[co, ci, k, k], 1.0, &mut rng);
        let bias = Tensor::uniform(&[co], 1.0, &mut rng);
        let out = conv2d_forward(&x, &kern, &bias).unwrap();
        let (ho, wo) = (h - k + 1, w - k + 1);
        for bi in 0..b {
            for o in 0..co {
                for y in 0..ho {
                    for xx in 0..wo {
                        let mut s = bias.data()[o];
                        for c in 0..ci {
                            for ky in 0..k {
                                for kx in 0..k {
                                    s += x.data()[((bi * ci + c) * h + y + ky) * w + xx + kx]
                                        * kern.data()[((o * ci + c) * k + ky) * k + kx];
                                }
                            }
                        }
                        let got = out.data()[((bi * co + o) * ho + y) * wo + xx];
                        assert!((got - s).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn oversized_kernel_rejected() {
        let e = conv2d_forward(&Tensor::zeros(&[1, 1, 2, 2]), &Tensor::zeros(&[1, 1, 3, 3]), &Tensor::zeros(&[1]));
        assert!(matches!(e, Err(NnError::ShapeMismatch(_))));
    }
}
