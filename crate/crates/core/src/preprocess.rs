//! Per-frame scaling, 720-frame standardization and differential features.
//!
//! Feature row layout (544 columns per frame):
//!
//! | columns   | block     | content                               |
//! |-----------|-----------|---------------------------------------|
//! | 0..136    | position  | `p0_x, p0_y, …, p67_x, p67_y` scaled  |
//! | 136..272  | d1        | first difference of each column       |
//! | 272..408  | d2        | second difference                     |
//! | 408..544  | d3        | third difference                      |
//!
//! Differences use the boundary convention `d[0] = 0`, so a padded static
//! tail produces exact zeros.

use std::fs;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::landmark_data::{Label, LandmarkFrame, LandmarkSequence, Point2, NUM_POINTS};

pub const SEGMENT_FRAMES: usize = 720;

/// Remainders at least this long are padded; shorter ones are dropped.
pub const MIN_KEPT_REMAINDER: usize = 600;

/// Axis ranges below this are treated as degenerate and mapped to 0.5.
pub const DEGENERATE_EPS: f64 = 1e-9;

pub const POSITION_COLUMNS: usize = 2 * NUM_POINTS;
pub const FEATURE_COLUMNS: usize = 4 * POSITION_COLUMNS;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureBlock {
    Position = 0,
    D1 = 1,
    D2 = 2,
    D3 = 3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X = 0,
    Y = 1,
}

/// Column of `(block, point, axis)` within a feature row.
pub const fn feature_column(block: FeatureBlock, point: usize, axis: Axis) -> usize {
    block as usize * POSITION_COLUMNS + 2 * point + axis as usize
}

#[derive(Debug, Error)]
pub enum PreprocessError {
    #[error("frame {frame_index}: expected {NUM_POINTS} points, found {found}")]
    PointCount { frame_index: u64, found: usize },
    #[error("video {0:?} has no frames")]
    EmptySequence(String),
    #[error("segment store: {0}")]
    Store(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn min_max_scale(values: impl Iterator<Item = f64> + Clone) -> impl Fn(f64) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let range = hi - lo;
    move |v| {
        if range < DEGENERATE_EPS {
            0.5
        } else {
            (v - lo) / range
        }
    }
}

/// Min-max scales each axis of a frame independently into `[0, 1]`.
pub fn scale_frame(frame: &LandmarkFrame) -> Result<LandmarkFrame, PreprocessError> {
    if frame.points.len() != NUM_POINTS {
        return Err(PreprocessError::PointCount {
            frame_index: frame.frame_index,
            found: frame.points.len(),
        });
    }
    let sx = min_max_scale(frame.points.iter().map(|p| p.x));
    let sy = min_max_scale(frame.points.iter().map(|p| p.y));
    Ok(LandmarkFrame {
        points: frame.points.iter().map(|p| Point2::new(sx(p.x), sy(p.y))).collect(),
        ..frame.clone()
    })
}

/// A 720-frame run of landmark points cut from one video, before feature
/// engineering.
#[derive(Debug, Clone, PartialEq)]
pub struct Precursor {
    pub source_video_id: String,
    pub segment_index: usize,
    pub label: Label,
    pub frames: Vec<Vec<Point2>>,
    /// Trailing frames that duplicate the last real frame.
    pub padded_frames: usize,
}

/// Splits a video into full 720-frame chunks and pads a trailing remainder of
/// at least 600 frames by repeating its last frame. Shorter remainders are
/// dropped.
pub fn standardize_length(seq: &LandmarkSequence) -> Result<Vec<Precursor>, PreprocessError> {
    if seq.frames.is_empty() {
        return Err(PreprocessError::EmptySequence(seq.video_id.clone()));
    }
    let mut out = Vec::new();
    for chunk in seq.frames.chunks(SEGMENT_FRAMES) {
        if chunk.len() < MIN_KEPT_REMAINDER {
            continue;
        }
        let mut frames: Vec<Vec<Point2>> = chunk.iter().map(|f| f.points.clone()).collect();
        let padded_frames = SEGMENT_FRAMES - chunk.len();
        let last = frames.last().cloned().expect("chunk is non-empty");
        frames.resize(SEGMENT_FRAMES, last);
        out.push(Precursor {
            source_video_id: seq.video_id.clone(),
            segment_index: out.len(),
            label: seq.label,
            frames,
            padded_frames,
        });
    }
    Ok(out)
}

fn diff(v: &[f64]) -> Vec<f64> {
    let mut d = vec![0.0; v.len()];
    for t in 1..v.len() {
        d[t] = v[t] - v[t - 1];
    }
    d
}

/// First, second and third backward differences with `d[0] = 0`.
pub fn differentials(series: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d1 = diff(series);
    let d2 = diff(&d1);
    let d3 = diff(&d2);
    (d1, d2, d3)
}

/// A standardized training unit: `frames × 544` features plus provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub source_video_id: String,
    pub segment_index: usize,
    pub label: Label,
    pub padded_frames: usize,
    pub frames: usize,
    /// Row-major `frames × FEATURE_COLUMNS`.
    pub features: Vec<f64>,
}

impl Segment {
    /// Stable identifier `"{video}#{index}"`.
    pub fn id(&self) -> String {
        format!("{}#{}", self.source_video_id, self.segment_index)
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.features[t * FEATURE_COLUMNS..(t + 1) * FEATURE_COLUMNS]
    }

    pub fn position(&self, t: usize, point: usize) -> Point2 {
        let row = self.row(t);
        Point2::new(
            row[feature_column(FeatureBlock::Position, point, Axis::X)],
            row[feature_column(FeatureBlock::Position, point, Axis::Y)],
        )
    }
}

/// Builds the 544-column feature matrix of a scaled precursor.
pub fn build_segment(precursor: Precursor) -> Segment {
    let frames = precursor.frames.len();
    let mut features = vec![0.0; frames * FEATURE_COLUMNS];
    let mut series = vec![0.0; frames];
    for col in 0..POSITION_COLUMNS {
        let (point, axis) = (col / 2, col % 2);
        for (t, pts) in precursor.frames.iter().enumerate() {
            series[t] = if axis == 0 { pts[point].x } else { pts[point].y };
        }
        let (d1, d2, d3) = differentials(&series);
        for t in 0..frames {
            let row = &mut features[t * FEATURE_COLUMNS..(t + 1) * FEATURE_COLUMNS];
            row[col] = series[t];
            row[POSITION_COLUMNS + col] = d1[t];
            row[2 * POSITION_COLUMNS + col] = d2[t];
            row[3 * POSITION_COLUMNS + col] = d3[t];
        }
    }
    Segment {
        source_video_id: precursor.source_video_id,
        segment_index: precursor.segment_index,
        label: precursor.label,
        padded_frames: precursor.padded_frames,
        frames,
        features,
    }
}

/// Scales every frame, standardizes the length and builds segments.
pub fn preprocess_sequence(seq: &LandmarkSequence) -> Result<Vec<Segment>, PreprocessError> {
    let frames = seq.frames.iter().map(scale_frame).collect::<Result<Vec<_>, _>>()?;
    let scaled = LandmarkSequence {
        video_id: seq.video_id.clone(),
        label: seq.label,
        frames,
    };
    Ok(standardize_length(&scaled)?.into_iter().map(build_segment).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PreprocessSummary {
    pub videos: usize,
    pub segments: usize,
    /// Videos that yielded no segment at all.
    pub dropped: usize,
    pub frames: usize,
}

impl std::fmt::Display for PreprocessSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "videos={} segments={} dropped={}", self.videos, self.segments, self.dropped)
    }
}

pub fn preprocess_corpus(sequences: &[LandmarkSequence]) -> Result<(Vec<Segment>, PreprocessSummary), PreprocessError> {
    let mut summary = PreprocessSummary {
        videos: sequences.len(),
        ..Default::default()
    };
    let mut segments = Vec::new();
    for seq in sequences {
        let segs = preprocess_sequence(seq)?;
        if segs.is_empty() {
            summary.dropped += 1;
        }
        summary.segments += segs.len();
        summary.frames += segs.iter().map(|s| s.frames).sum::<usize>();
        segments.extend(segs);
    }
    Ok((segments, summary))
}

const STORE_MAGIC: &[u8; 8] = b"LFXSEG1\0";
pub const STORE_DATA_FILE: &str = "segments.bin";
pub const STORE_META_FILE: &str = "segments.csv";
const STORE_META_HEADER: &str = "source_video_id,segment_index,label,padded_frames";

/// Writes `segments.bin` (raw little-endian `f64` features) and the
/// `segments.csv` sidecar into `dir`.
///
/// `segments.bin` holds magic `LFXSEG1\0`, `u32` frames per segment, `u32`
/// feature columns, `u64` segment count, then each segment's features in
/// the row-major column order documented at module level.
pub fn write_store(dir: &Path, segments: &[Segment]) -> Result<(), PreprocessError> {
    fs::create_dir_all(dir)?;
    let frames = segments.first().map_or(SEGMENT_FRAMES, |s| s.frames);
    if segments.iter().any(|s| s.frames != frames) {
        return Err(PreprocessError::Store("all segments must share one length".into()));
    }
    let mut data = BufWriter::new(fs::File::create(dir.join(STORE_DATA_FILE))?);
    data.write_all(STORE_MAGIC)?;
    data.write_all(&(frames as u32).to_le_bytes())?;
    data.write_all(&(FEATURE_COLUMNS as u32).to_le_bytes())?;
    data.write_all(&(segments.len() as u64).to_le_bytes())?;
    let mut meta = BufWriter::new(fs::File::create(dir.join(STORE_META_FILE))?);
    writeln!(meta, "{STORE_META_HEADER}")?;
    for s in segments {
        let mut buf = Vec::with_capacity(s.features.len() * 8);
        for v in &s.features {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        data.write_all(&buf)?;
        writeln!(meta, "{},{},{},{}", s.source_video_id, s.segment_index, s.label, s.padded_frames)?;
    }
    data.flush()?;
    meta.flush()?;
    Ok(())
}

pub fn read_store(dir: &Path) -> Result<Vec<Segment>, PreprocessError> {
    let bad = |m: &str| PreprocessError::Store(m.to_string());
    let meta_text = fs::read_to_string(dir.join(STORE_META_FILE))?;
    let mut lines = meta_text.lines();
    if lines.next() != Some(STORE_META_HEADER) {
        return Err(bad("metadata header mismatch"));
    }
    let mut data = BufReader::new(fs::File::open(dir.join(STORE_DATA_FILE))?);
    let mut head = [0u8; 24];
    data.read_exact(&mut head).map_err(|_| bad("truncated data header"))?;
    if &head[..8] != STORE_MAGIC {
        return Err(bad("bad magic"));
    }
    let frames = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let width = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
    if width != FEATURE_COLUMNS {
        return Err(bad("unexpected feature width"));
    }
    let mut segments = Vec::with_capacity(count);
    let mut raw = vec![0u8; frames * width * 8];
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        let [vid, idx, label, padded] = cells[..] else {
            return Err(bad(&format!("metadata line {}: expected 4 columns", i + 2)));
        };
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad(&format!("metadata line {}: {s:?}", i + 2)));
        let label = match label {
            "0" => Label::Real,
            "1" => Label::Fake,
            _ => return Err(bad(&format!("metadata line {}: bad label", i + 2))),
        };
        data.read_exact(&mut raw).map_err(|_| bad("data file shorter than metadata"))?;
        let features = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        segments.push(Segment {
            source_video_id: vid.to_string(),
            segment_index: parse(idx)?,
            label,
            padded_frames: parse(padded)?,
            frames,
            features,
        });
    }
    if segments.len() != count {
        return Err(bad("metadata and data disagree on segment count"));
    }
    Ok(segments)
}
