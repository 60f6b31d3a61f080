//! Seeded synthetic landmark corpus.
//!
//! Real videos move a 68-point face template with smooth low-frequency head
//! motion (translation, scale, roll) plus smooth articulation of the mouth,
//! brows and eyelids. Fake videos follow the same kind of motion and add
//! per-frame independent jitter of `±alpha · face_size` to a random subset of
//! points in a fraction `rho` of frames. The jitter is zero-mean, so single
//! frames look alike and the signal lives in the temporal differentials.

use std::f64::consts::{PI, TAU};
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::landmark_data::{write_csv, write_manifest, FacialGroup, Label, LandmarkFrame, LandmarkSequence, Point2, NUM_POINTS};
use crate::seed;

pub const LANDMARKS_FILE: &str = "landmarks.csv";
pub const MANIFEST_FILE: &str = "labels.csv";

/// Frames per second of the generated clips.
const FPS: f64 = 24.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_real: usize,
    pub n_fake: usize,
    pub frames: usize,
    /// Jitter half-width as a fraction of the face size.
    pub alpha: f64,
    /// Probability that a frame of a fake video is jittered.
    pub rho: f64,
    /// Probability that a point of a jittered frame moves.
    pub point_fraction: f64,
    /// Head translation amplitude in pixels.
    pub motion_amplitude: f64,
    pub image_width: u32,
    pub image_height: u32,
    /// Face size range in pixels (template width).
    pub face_size: (f64, f64),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_real: 60,
            n_fake: 60,
            frames: 720,
            alpha: 0.05,
            rho: 0.5,
            point_fraction: 0.5,
            motion_amplitude: 30.0,
            image_width: 640,
            image_height: 480,
            face_size: (170.0, 230.0),
            seed: 42,
        }
    }
}

fn arc(n: usize, from: f64, to: f64) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| from + (to - from) * i as f64 / (n - 1) as f64)
}

fn ellipse(n: usize, cx: f64, cy: f64, rx: f64, ry: f64) -> impl Iterator<Item = Point2> {
    (0..n).map(move |i| {
        let a = PI + TAU * i as f64 / n as f64;
        Point2::new(cx + rx * a.cos(), cy + ry * a.sin())
    })
}

/// The neutral face in template units: the jaw spans `x ∈ [-1, 1]`, image
/// y points down and the face centre sits at the origin.
pub fn template() -> Vec<Point2> {
    let mut p = Vec::with_capacity(NUM_POINTS);
    p.extend(arc(17, PI, 0.0).map(|a| Point2::new(a.cos(), -0.1 + 1.0 * a.sin().abs().powf(0.9))));
    for (from, to) in [(-0.75, -0.2), (0.2, 0.75)] {
        p.extend(arc(5, from, to).map(|x| Point2::new(x, -0.55 - 0.1 * (1.0 - ((x - (from + to) / 2.0) / 0.3).powi(2)))));
    }
    p.extend(arc(4, -0.4, 0.05).map(|y| Point2::new(0.0, y)));
    p.extend(arc(5, -0.2, 0.2).map(|x| Point2::new(x, 0.15 + 0.05 * (1.0 - (x / 0.2).powi(2)))));
    p.extend(ellipse(6, -0.42, -0.3, 0.16, 0.07));
    p.extend(ellipse(6, 0.42, -0.3, 0.16, 0.07));
    p.extend(ellipse(12, 0.0, 0.48, 0.36, 0.13));
    p.extend(ellipse(8, 0.0, 0.48, 0.22, 0.05));
    debug_assert_eq!(p.len(), NUM_POINTS);
    p
}

/// Sinusoid `amp · sin(2π f t / fps + phase)` with random frequency/phase.
#[derive(Debug, Clone, Copy)]
struct Wave {
    amp: f64,
    freq: f64,
    phase: f64,
}

impl Wave {
    fn random(rng: &mut ChaCha8Rng, amp: f64, freq: (f64, f64)) -> Wave {
        Wave {
            amp: amp * rng.random_range(0.5..1.0),
            freq: rng.random_range(freq.0..freq.1),
            phase: rng.random_range(0.0..TAU),
        }
    }

    fn at(&self, t: f64) -> f64 {
        self.amp * (TAU * self.freq * t / FPS + self.phase).sin()
    }
}

/// Maximum relative template motions, used by the bounds below.
const SCALE_AMP: f64 = 0.05;
const ROLL_AMP: f64 = 0.08;
const MOUTH_AMP: f64 = 0.5;
const BROW_AMP: f64 = 0.04;

struct Motion {
    cx: f64,
    cy: f64,
    size: f64,
    tx: Wave,
    ty: Wave,
    scale: Wave,
    roll: Wave,
    mouth: Wave,
    brow: Wave,
    blink_period: f64,
    blink_phase: f64,
}

impl Motion {
    fn random(cfg: &SynthConfig, rng: &mut ChaCha8Rng) -> Motion {
        let (w, h) = (f64::from(cfg.image_width), f64::from(cfg.image_height));
        Motion {
            cx: w / 2.0 + rng.random_range(-0.05..0.05) * w,
            cy: h / 2.0 + rng.random_range(-0.05..0.05) * h,
            size: rng.random_range(cfg.face_size.0..=cfg.face_size.1),
            tx: Wave::random(rng, cfg.motion_amplitude, (0.05, 0.3)),
            ty: Wave::random(rng, cfg.motion_amplitude, (0.05, 0.3)),
            scale: Wave::random(rng, SCALE_AMP, (0.02, 0.15)),
            roll: Wave::random(rng, ROLL_AMP, (0.05, 0.25)),
            mouth: Wave::random(rng, MOUTH_AMP, (0.2, 0.8)),
            brow: Wave::random(rng, BROW_AMP, (0.1, 0.4)),
            blink_period: rng.random_range(72.0..144.0),
            blink_phase: rng.random_range(0.0..1.0),
        }
    }

    /// Eyelid openness in `[0.2, 1]`: closes smoothly for ~6 frames per period.
    fn eye_open(&self, t: f64) -> f64 {
        let phase = (t / self.blink_period + self.blink_phase).fract();
        let width = 6.0 / self.blink_period;
        if phase < width {
            1.0 - 0.8 * (PI * phase / width).sin().powi(2)
        } else {
            1.0
        }
    }

    fn frame(&self, template: &[Point2], t: f64) -> Vec<Point2> {
        let mouth = 1.0 + self.mouth.at(t).abs();
        let brow = self.brow.at(t);
        let eye = self.eye_open(t);
        let s = self.size / 2.0 * (1.0 + self.scale.at(t));
        let (sin, cos) = self.roll.at(t).sin_cos();
        let (cx, cy) = (self.cx + self.tx.at(t), self.cy + self.ty.at(t));
        template
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let (x, mut y) = (p.x, p.y);
                match FacialGroup::of(i) {
                    Some(FacialGroup::OuterLip | FacialGroup::InnerLip) => y = 0.48 + (y - 0.48) * mouth,
                    Some(FacialGroup::LeftEyebrow | FacialGroup::RightEyebrow) => y -= brow,
                    Some(FacialGroup::LeftEye | FacialGroup::RightEye) => y = -0.3 + (y + 0.3) * eye,
                    _ => {}
                }
                Point2::new(cx + s * (cos * x - sin * y), cy + s * (sin * x + cos * y))
            })
            .collect()
    }
}

pub fn video_id(label: Label, index: usize) -> String {
    match label {
        Label::Real => format!("real_{index:03}"),
        Label::Fake => format!("fake_{index:03}"),
    }
}

/// One video. Head motion and jitter draw from separate streams keyed by
/// the video id, so a fake with `alpha = 0` equals its smooth base motion.
pub fn generate_video(cfg: &SynthConfig, label: Label, index: usize) -> LandmarkSequence {
    let id = video_id(label, index);
    let template = template();
    let motion = Motion::random(cfg, &mut seed::rng(seed::derive_keyed(cfg.seed, "synth-motion", &id, 0)));
    let mut jitter = seed::rng(seed::derive_keyed(cfg.seed, "synth-jitter", &id, 0));
    let amplitude = cfg.alpha * motion.size;
    let frames = (0..cfg.frames)
        .map(|t| {
            let mut points = motion.frame(&template, t as f64);
            if label == Label::Fake && amplitude > 0.0 && jitter.random_bool(cfg.rho) {
                for p in &mut points {
                    if jitter.random_bool(cfg.point_fraction) {
                        p.x += jitter.random_range(-amplitude..=amplitude);
                        p.y += jitter.random_range(-amplitude..=amplitude);
                    }
                }
            }
            LandmarkFrame {
                video_id: id.clone(),
                frame_index: t as u64,
                image_height: cfg.image_height,
                image_width: cfg.image_width,
                points,
            }
        })
        .collect();
    LandmarkSequence {
        video_id: id,
        label,
        frames,
    }
}

/// Reals first, then fakes, each in index order.
pub fn generate(cfg: &SynthConfig) -> Vec<LandmarkSequence> {
    (0..cfg.n_real)
        .map(|i| generate_video(cfg, Label::Real, i))
        .chain((0..cfg.n_fake).map(|i| generate_video(cfg, Label::Fake, i)))
        .collect()
}

/// Box that contains every generated coordinate: the template extent
/// inflated by articulation, scale, roll, translation and jitter.
pub fn coordinate_bounds(cfg: &SynthConfig) -> (Point2, Point2) {
    let t = template();
    let radius = t
        .iter()
        .map(|p| {
            let y = if p.y > 0.3 { 0.48 + (p.y - 0.48).abs() * (1.0 + MOUTH_AMP) } else { p.y.abs() + BROW_AMP };
            p.x.hypot(y.abs())
        })
        .fold(0.0, f64::max);
    let half = cfg.face_size.1 / 2.0 * (1.0 + SCALE_AMP) * radius;
    let (w, h) = (f64::from(cfg.image_width), f64::from(cfg.image_height));
    let pad_x = 0.05 * w + cfg.motion_amplitude + half + cfg.alpha * cfg.face_size.1;
    let pad_y = 0.05 * h + cfg.motion_amplitude + half + cfg.alpha * cfg.face_size.1;
    (Point2::new(w / 2.0 - pad_x, h / 2.0 - pad_y), Point2::new(w / 2.0 + pad_x, h / 2.0 + pad_y))
}

/// Writes `landmarks.csv` and `labels.csv` into `dir`.
pub fn write_corpus(dir: &Path, sequences: &[LandmarkSequence]) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    write_csv(BufWriter::new(fs::File::create(dir.join(LANDMARKS_FILE))?), sequences)?;
    write_manifest(BufWriter::new(fs::File::create(dir.join(MANIFEST_FILE))?), sequences)?;
    Ok(())
}
