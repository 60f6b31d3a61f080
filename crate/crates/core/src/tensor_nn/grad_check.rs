//! Central-difference gradient verification.

use rand::Rng;

use super::network::{Mode, Network};
use super::{NnError, Tensor};

/// Central-difference step.
pub const DEFAULT_STEP: f64 = 1e-5;

/// Denominator floor for relative errors. A central difference at
/// [`DEFAULT_STEP`] carries about 1e-11 of absolute rounding error on an O(1)
/// loss, so gradients smaller than this compare on an absolute scale: a
/// relative error of 1e-5 here means an absolute error of 1e-10.
pub const RELATIVE_FLOOR: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Flat index of the worst element.
    pub worst_index: usize,
    pub checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Compares `analytic` against central differences of `f` around `x0`.
pub fn check_gradients(x0: &[f64], analytic: &[f64], mut f: impl FnMut(&[f64]) -> f64, h: f64) -> GradCheckReport {
    assert_eq!(x0.len(), analytic.len(), "one analytic gradient per variable");
    let mut x = x0.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        checked: x0.len(),
    };
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = f(&x);
        x[i] = orig - h;
        let minus = f(&x);
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let err = relative_error(analytic[i], numeric);
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = i;
        }
    }
    report
}

/// Scalar objective over a network output: returns the loss and `dL/dout`.
pub type Objective<'a> = dyn Fn(&Tensor) -> Result<(f64, Tensor), NnError> + 'a;

/// `L = Σ out ⊙ R` for a fixed random `R`; its output gradient is `R`.
pub fn random_projection(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = crate::seed::rng(seed);
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    t
}

pub fn projection_objective(weights: Tensor) -> impl Fn(&Tensor) -> Result<(f64, Tensor), NnError> {
    move |out: &Tensor| {
        let loss = out.data().iter().zip(weights.data()).map(|(a, b)| a * b).sum();
        Ok((loss, weights.clone()))
    }
}

/// Checks every parameter and input element of `net` (evaluated in eval mode)
/// under `objective`.
pub fn grad_check_network(net: &Network, input: &Tensor, objective: &Objective<'_>) -> Result<GradCheckReport, NnError> {
    let mut work = net.clone();
    work.zero_grad();
    let (out, caches) = work.forward(input, &mut Mode::Eval)?;
    let (_, dout) = objective(&out)?;
    let dx = work.backward(&caches, &dout, true)?.expect("input gradient requested");

    let n_params = work.param_count();
    let mut x0 = work.flat_params();
    x0.extend_from_slice(input.data());
    let mut analytic = work.flat_grads();
    analytic.extend_from_slice(dx.data());

    let mut probe = net.clone();
    let mut probe_input = input.clone();
    let mut failure = None;
    let report = check_gradients(
        &x0,
        &analytic,
        |x| {
            probe.set_flat_params(&x[..n_params]);
            probe_input.data_mut().copy_from_slice(&x[n_params..]);
            match probe.infer(&probe_input).and_then(|o| objective(&o)) {
                Ok((l, _)) => l,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        DEFAULT_STEP,
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_nn::{Conv2d, Dense, Dropout, Layer, Lstm};
    use rand::SeedableRng;

    fn check(net: Network, input_shape: &[usize], out_shape: &[usize], seed: u64) -> GradCheckReport {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let input = Tensor::uniform(input_shape, 1.0, &mut rng);
        let objective = projection_objective(random_projection(out_shape, seed + 1));
        grad_check_network(&net, &input, &objective).unwrap()
    }

    #[test]
    fn dense_layer() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let net = Network::new(vec![Layer::Dense(Dense::new(3, 4, &mut rng))]);
        let r = check(net, &[2, 3], &[2, 4], 10);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
        assert_eq!(r.checked, 3 * 4 + 4 + 6);
    }

    #[test]
    fn lstm_three_step_unroll() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let net = Network::new(vec![Layer::Lstm(Lstm::new(3, 4, true, &mut rng))]);
        let r = check(net, &[2, 3, 3], &[2, 3, 4], 20);
        assert!(r.max_rel_error < 1e-5, "{r:?}");

        let net = Network::new(vec![Layer::Lstm(Lstm::new(3, 4, false, &mut rng))]);
        let r = check(net, &[2, 3, 3], &[2, 4], 21);
        assert!(r.max_rel_error < 1e-5, "{r:?}");
    }

    #[test]
    fn conv2d_layer() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let net = Network::new(vec![Layer::Conv2d(Conv2d::new(2, 3, 3, &mut rng))]);
        let r = check(net, &[1, 2, 5, 5], &[1, 3, 3, 3], 30);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn activations_flatten_and_inference_dropout() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let net = Network::new(vec![
            Layer::Conv2d(Conv2d::new(1, 2, 2, &mut rng)),
            Layer::tanh(),
            Layer::Dropout(Dropout::new(0.5).unwrap()),
            Layer::Flatten,
            Layer::Dense(Dense::new(2 * 3 * 3, 3, &mut rng)),
            Layer::relu(),
            Layer::Dense(Dense::new(3, 1, &mut rng)),
            Layer::sigmoid(),
        ]);
        let r = check(net, &[2, 1, 4, 4], &[2, 1], 40);
        assert!(r.max_rel_error < 1e-6, "{r:?}");
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let x0 = [0.3, -0.7];
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[1];
        let good = check_gradients(&x0, &[0.6, 3.0], f, DEFAULT_STEP);
        assert!(good.max_rel_error < 1e-9);
        let bad = check_gradients(&x0, &[0.6, 2.9], f, DEFAULT_STEP);
        assert!(bad.max_rel_error > 1e-2);
        assert_eq!(bad.worst_index, 1);
    }
}
