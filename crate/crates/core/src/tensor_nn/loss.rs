use super::{shape_err, NnError, Tensor};

/// Probabilities are clamped to `[BCE_CLAMP, 1 - BCE_CLAMP]` before taking logs.
pub const BCE_CLAMP: f64 = 1e-12;

/// Mean binary cross-entropy and its gradient with respect to `p`.
pub fn bce_loss(p: &Tensor, y: &Tensor) -> Result<(f64, Tensor), NnError> {
    if p.shape() != y.shape() {
        return Err(shape_err(format!("bce: predictions {:?} vs targets {:?}", p.shape(), y.shape())));
    }
    let n = p.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(p.len());
    for (&pi, &yi) in p.data().iter().zip(y.data()) {
        let q = pi.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
        loss -= yi * q.ln() + (1.0 - yi) * (1.0 - q).ln();
        grad.push((-yi / q + (1.0 - yi) / (1.0 - q)) / n);
    }
    Ok((loss / n, Tensor::new(p.shape().to_vec(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_chance_predictions() {
        let y = Tensor::from_vec(vec![1.0, 0.0, 1.0]);
        let (l, _) = bce_loss(&y, &y).unwrap();
        assert!((0.0..1e-11).contains(&l), "{l}");
        let half = Tensor::filled(&[3], 0.5);
        let (l, _) = bce_loss(&half, &y).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn gradient_matches_central_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let p = Tensor::new(vec![6], (0..6).map(|_| rng.random_range(0.05..0.95)).collect()).unwrap();
        let y = Tensor::new(vec![6], (0..6).map(|i| (i % 2) as f64).collect()).unwrap();
        let (_, g) = bce_loss(&p, &y).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            let mut plus = p.clone();
            plus.data_mut()[i] += h;
            let mut minus = p.clone();
            minus.data_mut()[i] -= h;
            let num = (bce_loss(&plus, &y).unwrap().0 - bce_loss(&minus, &y).unwrap().0) / (2.0 * h);
            let rel = (num - g.data()[i]).abs() / g.data()[i].abs();
            assert!(rel < 1e-6, "element {i}: {rel}");
        }
    }
}
