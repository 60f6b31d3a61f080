#![allow(dead_code)]

use lfx_core::landmark_data::{Label, LandmarkFrame, LandmarkSequence, Point2, NUM_POINTS};
use rand::Rng;

pub const WIDTH: u32 = 640;
pub const HEIGHT: u32 = 480;

pub fn random_points<R: Rng>(rng: &mut R) -> Vec<Point2> {
    (0..NUM_POINTS)
        .map(|_| Point2::new(rng.random_range(100.0..500.0), rng.random_range(80.0..400.0)))
        .collect()
}

/// A video whose every frame is independently random.
pub fn random_sequence<R: Rng>(id: &str, label: Label, len: usize, rng: &mut R) -> LandmarkSequence {
    let frames = (0..len)
        .map(|t| LandmarkFrame {
            video_id: id.to_string(),
            frame_index: t as u64,
            image_height: HEIGHT,
            image_width: WIDTH,
            points: random_points(rng),
        })
        .collect();
    LandmarkSequence {
        video_id: id.to_string(),
        label,
        frames,
    }
}

/// A video repeating one random frame; cheap to build at any length.
pub fn still_sequence<R: Rng>(id: &str, label: Label, len: usize, rng: &mut R) -> LandmarkSequence {
    let points = random_points(rng);
    let frames = (0..len)
        .map(|t| LandmarkFrame {
            video_id: id.to_string(),
            frame_index: t as u64,
            image_height: HEIGHT,
            image_width: WIDTH,
            points: points.clone(),
        })
        .collect();
    LandmarkSequence {
        video_id: id.to_string(),
        label,
        frames,
    }
}

/// Segments a video of `len` frames yields: whole 720-frame chunks plus a
/// trailing remainder of at least 600.
pub fn expected_segments(len: usize) -> usize {
    len / 720 + usize::from(len % 720 >= 600)
}

/// Backward differences `x[t] - x[t-1]`, zero at `t = 0`, written as a plain loop.
pub fn difference_oracle(x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut prev = None;
    for &v in x {
        out.push(match prev {
            None => 0.0,
            Some(p) => v - p,
        });
        prev = Some(v);
    }
    out
}

/// Pairwise ROC-AUC oracle: the fraction of (fake, real) pairs with the fake
/// scored higher, ties counting half.
pub fn pairwise_auc(scores: &[f64], labels: &[Label]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != Label::Fake {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != Label::Real {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Independent raster oracle. Each segment between consecutive cells lights
/// the cells `major = a + i·s`, `minor = b + s'·floor((2i|dm| + |dM| - 1) / (2|dM|))`
/// for `i` in `0..=|dM|`, where `dM` is the longer extent (x on ties).
pub fn raster_oracle(trajectory: &[(f64, f64)], r: usize) -> Vec<u8> {
    let to_cell = |v: f64| -> i64 { ((v * r as f64).floor() as i64).clamp(0, r as i64 - 1) };
    let cells: Vec<(i64, i64)> = trajectory.iter().map(|&(x, y)| (to_cell(x), to_cell(y))).collect();
    let mut img = vec![0u8; r * r];
    let mut light = |x: i64, y: i64| img[y as usize * r + x as usize] = 1;
    if let [only] = cells.as_slice() {
        light(only.0, only.1);
    }
    for w in cells.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        let (dx, dy) = (x1 - x0, y1 - y0);
        let x_major = dx.abs() >= dy.abs();
        let (big, small) = if x_major { (dx, dy) } else { (dy, dx) };
        let n = big.abs();
        for i in 0..=n {
            let along = big.signum() * i;
            let across = if n == 0 {
                0
            } else {
                small.signum() * ((2 * i * small.abs() + n - 1) / (2 * n))
            };
            if x_major {
                light(x0 + along, y0 + across);
            } else {
                light(x0 + across, y0 + along);
            }
        }
    }
    img
}
