//! Row-major matrix products.
//!
//! Output rows are independent units of work. When `LFX_THREADS` allows more
//! than one worker and the product is large enough, rows are distributed over
//! a rayon pool; each element's summation order is identical either way.

use std::sync::OnceLock;

use rayon::prelude::*;

const PARALLEL_MIN_WORK: usize = 1 << 18;

fn pool() -> Option<&'static rayon::ThreadPool> {
    static POOL: OnceLock<Option<rayon::ThreadPool>> = OnceLock::new();
    POOL.get_or_init(|| {
        let threads = worker_count();
        if threads <= 1 {
            return None;
        }
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok()
    })
    .as_ref()
}

/// Worker cap from `LFX_THREADS`, defaulting to the available parallelism.
pub fn worker_count() -> usize {
    match std::env::var("LFX_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        Some(n) if n >= 1 => n,
        _ => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    }
}

fn for_rows(out: &mut [f64], row_len: usize, work: usize, f: impl Fn(usize, &mut [f64]) + Sync + Send) {
    if row_len == 0 {
        return;
    }
    match pool() {
        Some(p) if work >= PARALLEL_MIN_WORK => p.install(|| {
            out.par_chunks_mut(row_len).enumerate().for_each(|(i, row)| f(i, row));
        }),
        _ => out.chunks_mut(row_len).enumerate().for_each(|(i, row)| f(i, row)),
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dot product with four interleaved accumulators (fixed order).
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `out[m×n] += a[m×k] · b[k×n]`.
pub fn matmul_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), k * n);
    assert_eq!(out.len(), m * n);
    for_rows(out, n, m * k * n, |i, row| {
        let ai = &a[i * k..(i + 1) * k];
        for (p, &aip) in ai.iter().enumerate() {
            if aip != 0.0 {
                axpy(aip, &b[p * n..(p + 1) * n], row);
            }
        }
    });
}

/// `out[k×n] += aᵀ · b` where `a` is `m×k` and `b` is `m×n`.
pub fn matmul_at_b_acc(a: &[f64], b: &[f64], m: usize, k: usize, n: usize, out: &mut [f64]) {
    assert_eq!(a.len(), m * k);
    assert_eq!(b.len(), m * n);
    assert_eq!(out.len(), k * n);
    for_rows(out, n, m * k * n, |p, row| {
        for i in 0..m {
            let aip = a[i * k + p];
            if aip != 0.0 {
                axpy(aip, &b[i * n..(i + 1) * n], row);
            }
        }
    });
}

/// `out[m×k] += a · bᵀ` where `a` is `m×n` and `b` is `k×n`.
pub fn matmul_a_bt_acc(a: &[f64], b: &[f64], m: usize, n: usize, k: usize, out: &mut [f64]) {
    assert_eq!(a.len(), m * n);
    assert_eq!(b.len(), k * n);
    assert_eq!(out.len(), m * k);
    for_rows(out, k, m * k * n, |i, row| {
        let ai = &a[i * n..(i + 1) * n];
        for (p, o) in row.iter_mut().enumerate() {
            *o += dot(ai, &b[p * n..(p + 1) * n]);
        }
    });
}
