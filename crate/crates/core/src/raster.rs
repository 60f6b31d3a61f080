//! One-second trajectory images for the convolutional model.
//!
//! A 720-frame segment is cut into 30 splices of 24 frames. For every
//! landmark the 24 scaled positions are drawn as a polyline on an `R × R`
//! grid, and the 68 rasters are stacked into a `[68, R, R]` image. Rows index
//! the y cell and columns the x cell.

use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::landmark_data::{Label, Point2, NUM_POINTS};
use crate::preprocess::Segment;
use crate::seed;
use crate::tensor_nn::Tensor;

pub const SPLICE_FRAMES: usize = 24;
pub const SPLICES_PER_SEGMENT: usize = 30;
pub const DEFAULT_RESOLUTION: usize = 32;
pub const DEFAULT_SIGMA: f64 = 0.01;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("expected {NUM_POINTS} channels, got {0}")]
    ChannelCount(usize),
    #[error("rasters must share one resolution")]
    ResolutionMismatch,
    #[error("invalid noise sigma {0}")]
    InvalidSigma(f64),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryImage {
    pub source_segment_id: String,
    pub splice_index: usize,
    pub label: Label,
    /// `[68, R, R]`.
    pub pixels: Tensor,
}

impl TrajectoryImage {
    pub fn resolution(&self) -> usize {
        self.pixels.shape()[1]
    }
}

/// Frame ranges of the consecutive, non-overlapping 24-frame splices.
pub fn splice_ranges(frames: usize) -> Vec<Range<usize>> {
    (0..frames / SPLICE_FRAMES)
        .map(|s| s * SPLICE_FRAMES..(s + 1) * SPLICE_FRAMES)
        .collect()
}

/// The 68 per-point trajectories of one splice, read from the position block.
pub fn splice_trajectories(segment: &Segment, splice_index: usize) -> Vec<Vec<Point2>> {
    let frames = splice_index * SPLICE_FRAMES..(splice_index + 1) * SPLICE_FRAMES;
    (0..NUM_POINTS)
        .map(|p| frames.clone().map(|t| segment.position(t, p)).collect())
        .collect()
}

/// Grid cell of a unit-interval coordinate; 1.0 falls into the last cell.
pub fn cell(v: f64, resolution: usize) -> usize {
    let c = (v * resolution as f64).floor();
    if c <= 0.0 {
        0
    } else {
        (c as usize).min(resolution - 1)
    }
}

/// Integer line stepping between two cells, endpoints included. The axis
/// with the larger extent advances every step; the other advances when the
/// error term turns positive, so exact half-way ties round toward the start.
pub fn draw_line(from: (i64, i64), to: (i64, i64), mut plot: impl FnMut(i64, i64)) {
    let (dx, dy) = (to.0 - from.0, to.1 - from.1);
    let (sx, sy) = (dx.signum(), dy.signum());
    let (ax, ay) = (dx.abs(), dy.abs());
    let (mut x, mut y) = from;
    if ax >= ay {
        let mut err = 2 * ay - ax;
        for _ in 0..=ax {
            plot(x, y);
            if err > 0 {
                y += sy;
                err -= 2 * ax;
            }
            err += 2 * ay;
            x += sx;
        }
    } else {
        let mut err = 2 * ax - ay;
        for _ in 0..=ay {
            plot(x, y);
            if err > 0 {
                x += sx;
                err -= 2 * ay;
            }
            err += 2 * ax;
            y += sy;
        }
    }
}

/// Draws one point's trajectory as a binary `[R, R]` polyline raster.
pub fn rasterize_point(trajectory: &[Point2], resolution: usize) -> Tensor {
    let mut out = Tensor::zeros(&[resolution, resolution]);
    let cells: Vec<(i64, i64)> = trajectory
        .iter()
        .map(|p| (cell(p.x, resolution) as i64, cell(p.y, resolution) as i64))
        .collect();
    let data = out.data_mut();
    let mut plot = |x: i64, y: i64| data[y as usize * resolution + x as usize] = 1.0;
    match cells.as_slice() {
        [] => {}
        [only] => plot(only.0, only.1),
        _ => {
            for pair in cells.windows(2) {
                draw_line(pair[0], pair[1], &mut plot);
            }
        }
    }
    out
}

/// Stacks 68 rasters in landmark order and adds i.i.d. `N(0, σ²)` noise to
/// every pixel when `noise_seed` is given.
pub fn stack_and_noise(rasters: &[Tensor], sigma: f64, noise_seed: Option<u64>) -> Result<Tensor, RasterError> {
    if rasters.len() != NUM_POINTS {
        return Err(RasterError::ChannelCount(rasters.len()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(RasterError::InvalidSigma(sigma));
    }
    let shape = rasters[0].shape().to_vec();
    if shape.len() != 2 || shape[0] != shape[1] || rasters.iter().any(|r| r.shape() != shape.as_slice()) {
        return Err(RasterError::ResolutionMismatch);
    }
    let mut data = Vec::with_capacity(NUM_POINTS * shape[0] * shape[1]);
    for r in rasters {
        data.extend_from_slice(r.data());
    }
    if let (Some(s), true) = (noise_seed, sigma > 0.0) {
        let normal = Normal::new(0.0, sigma).expect("sigma validated above");
        let mut rng = seed::rng(s);
        for v in &mut data {
            *v += normal.sample(&mut rng);
        }
    }
    Ok(Tensor::new(vec![NUM_POINTS, shape[0], shape[1]], data).expect("shape matches data"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterConfig {
    pub resolution: usize,
    pub sigma: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            resolution: DEFAULT_RESOLUTION,
            sigma: DEFAULT_SIGMA,
        }
    }
}

/// Seed of the noise added to one splice, independent of processing order.
pub fn splice_noise_seed(root: u64, segment_id: &str, splice_index: usize) -> u64 {
    seed::derive_keyed(root, "noise", segment_id, splice_index as u64)
}

/// Builds the image of one splice. `noise_root` enables training noise.
pub fn splice_image(
    segment: &Segment,
    splice_index: usize,
    config: &RasterConfig,
    noise_root: Option<u64>,
) -> Result<TrajectoryImage, RasterError> {
    let id = segment.id();
    let rasters: Vec<Tensor> = splice_trajectories(segment, splice_index)
        .iter()
        .map(|t| rasterize_point(t, config.resolution))
        .collect();
    let noise_seed = noise_root.map(|root| splice_noise_seed(root, &id, splice_index));
    Ok(TrajectoryImage {
        pixels: stack_and_noise(&rasters, config.sigma, noise_seed)?,
        source_segment_id: id,
        splice_index,
        label: segment.label,
    })
}

/// All 30 images of a segment, each carrying the segment's label.
pub fn segment_images(
    segment: &Segment,
    config: &RasterConfig,
    noise_root: Option<u64>,
) -> Result<Vec<TrajectoryImage>, RasterError> {
    (0..splice_ranges(segment.frames).len())
        .map(|s| splice_image(segment, s, config, noise_root))
        .collect()
}

/// Writes each channel as a binary P5 grayscale file
/// `{segment}_{splice}_{point}.pgm`, clamping pixels to `[0, 1]`. The `#`
/// in segment ids is replaced by `-` to keep file names portable.
pub fn dump_pgm(dir: &Path, image: &TrajectoryImage) -> Result<(), RasterError> {
    fs::create_dir_all(dir)?;
    let r = image.resolution();
    let segment = image.source_segment_id.replace('#', "-");
    for (point, channel) in image.pixels.data().chunks_exact(r * r).enumerate() {
        let name = format!("{segment}_{}_{point}.pgm", image.splice_index);
        let mut f = fs::File::create(dir.join(name))?;
        write!(f, "P5\n{r} {r}\n255\n")?;
        let bytes: Vec<u8> = channel.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        f.write_all(&bytes)?;
    }
    Ok(())
}
