//! Landmark sequences and the landmark CSV / label manifest wire formats.
//!
//! Landmark CSV layout, one row per frame:
//!
//! ```text
//! video_id,frame_index,image_height,image_width,p0_x,p0_y,...,p67_x,p67_y
//! ```
//!
//! 140 columns, UTF-8, `.` as decimal point, LF or CRLF line endings. Raw
//! coordinates are pixels and may be negative or fall outside the image.
//!
//! Labels live in a separate two-column manifest `video_id,label` with
//! `0 = real` and `1 = fake`.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of landmarks produced by the 68-point predictor.
pub const NUM_POINTS: usize = 68;

/// Landmark CSV columns: id, frame index, height, width and one (x, y) pair per point.
pub const NUM_COLUMNS: usize = 4 + 2 * NUM_POINTS;

const MANIFEST_HEADER: &str = "video_id,label";

/// Anatomical groups of the 68-point layout, in predictor index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FacialGroup {
    Chin,
    LeftEyebrow,
    RightEyebrow,
    NoseBridge,
    NoseBottom,
    LeftEye,
    RightEye,
    OuterLip,
    InnerLip,
}

/// Group sizes in canonical order; indices are assigned contiguously.
pub const GROUPS: [(FacialGroup, usize); 9] = [
    (FacialGroup::Chin, 17),
    (FacialGroup::LeftEyebrow, 5),
    (FacialGroup::RightEyebrow, 5),
    (FacialGroup::NoseBridge, 4),
    (FacialGroup::NoseBottom, 5),
    (FacialGroup::LeftEye, 6),
    (FacialGroup::RightEye, 6),
    (FacialGroup::OuterLip, 12),
    (FacialGroup::InnerLip, 8),
];

const fn group_total() -> usize {
    let mut total = 0;
    let mut i = 0;
    while i < GROUPS.len() {
        total += GROUPS[i].1;
        i += 1;
    }
    total
}

const _: () = assert!(group_total() == NUM_POINTS);

impl FacialGroup {
    /// Half-open index range of this group within a frame's points.
    pub fn range(self) -> std::ops::Range<usize> {
        let mut start = 0;
        for (group, len) in GROUPS {
            if group == self {
                return start..start + len;
            }
            start += len;
        }
        unreachable!("every group is listed in GROUPS")
    }

    /// Group owning landmark `index`, or `None` when `index >= 68`.
    pub fn of(index: usize) -> Option<FacialGroup> {
        GROUPS.iter().map(|&(g, _)| g).find(|g| g.range().contains(&index))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Binary verdict; `Fake` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Real = 0,
    Fake = 1,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Label> {
        match v {
            0 => Some(Label::Real),
            1 => Some(Label::Fake),
            _ => None,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_u8())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    pub video_id: String,
    pub frame_index: u64,
    pub image_height: u32,
    pub image_width: u32,
    /// Canonical predictor order; exactly [`NUM_POINTS`] entries when valid.
    pub points: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSequence {
    pub video_id: String,
    pub label: Label,
    pub frames: Vec<LandmarkFrame>,
}

/// `video_id → label` mapping loaded from the manifest file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabelManifest {
    labels: HashMap<String, Label>,
}

impl LabelManifest {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a label; returns `false` if the id was already present.
    pub fn insert(&mut self, video_id: impl Into<String>, label: Label) -> bool {
        use std::collections::hash_map::Entry;
        match self.labels.entry(video_id.into()) {
            Entry::Occupied(_) => false,
            Entry::Vacant(v) => {
                v.insert(label);
                true
            }
        }
    }

    pub fn get(&self, video_id: &str) -> Option<Label> {
        self.labels.get(video_id).copied()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl FromIterator<(String, Label)> for LabelManifest {
    fn from_iter<I: IntoIterator<Item = (String, Label)>>(iter: I) -> Self {
        let mut m = LabelManifest::new();
        for (id, label) in iter {
            m.insert(id, label);
        }
        m
    }
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Schema { line: u64, message: String },
    #[error("line {line}: duplicate frame {frame_index} for video {video_id:?}")]
    DuplicateFrame {
        line: u64,
        video_id: String,
        frame_index: u64,
    },
    #[error("line {line}: video {video_id:?} is not in the label manifest")]
    UnknownVideo { line: u64, video_id: String },
    #[error("line {line}: video {video_id:?} appears more than once in the manifest")]
    DuplicateLabel { line: u64, video_id: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl ParseError {
    fn schema(line: u64, message: impl Into<String>) -> Self {
        ParseError::Schema {
            line,
            message: message.into(),
        }
    }
}

/// The exact header line of the landmark CSV.
pub fn csv_header() -> String {
    let mut h = String::from("video_id,frame_index,image_height,image_width");
    for p in 0..NUM_POINTS {
        h.push_str(&format!(",p{p}_x,p{p}_y"));
    }
    h
}

fn reader<R: Read>(stream: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::None)
        .from_reader(stream)
}

fn map_csv_error(err: csv::Error) -> ParseError {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.kind() {
        csv::ErrorKind::Io(_) => match err.into_kind() {
            csv::ErrorKind::Io(io) => ParseError::Io(io),
            _ => unreachable!(),
        },
        csv::ErrorKind::Utf8 { .. } => ParseError::schema(line, "invalid UTF-8"),
        _ => ParseError::schema(line, err.to_string()),
    }
}

fn check_header(record: &csv::StringRecord, expected: &str, line: u64) -> Result<(), ParseError> {
    let got = record.iter().collect::<Vec<_>>().join(",");
    if got == expected {
        Ok(())
    } else {
        Err(ParseError::schema(line, "header does not match the expected column layout"))
    }
}

fn parse_field<T: std::str::FromStr>(cell: &str, line: u64, column: &str) -> Result<T, ParseError> {
    cell.parse::<T>()
        .map_err(|_| ParseError::schema(line, format!("column {column}: non-numeric value {cell:?}")))
}

fn parse_coord(cell: &str, line: u64, column: usize) -> Result<f64, ParseError> {
    let v: f64 = cell
        .parse()
        .map_err(|_| ParseError::schema(line, format!("column {column}: non-numeric value {cell:?}")))?;
    if !v.is_finite() {
        return Err(ParseError::schema(line, format!("column {column}: non-finite value {cell:?}")));
    }
    Ok(v)
}

/// Parses a landmark CSV into labeled sequences.
///
/// Videos come out in first-appearance order and each video's frames are
/// sorted by `frame_index`. The first malformed row aborts parsing with its
/// 1-based line number.
pub fn parse_csv<R: Read>(stream: R, manifest: &LabelManifest) -> Result<Vec<LandmarkSequence>, ParseError> {
    let mut rdr = reader(stream);
    let mut sequences: Vec<LandmarkSequence> = Vec::new();
    let mut index_of: HashMap<String, usize> = HashMap::new();
    let mut seen: HashMap<String, std::collections::HashSet<u64>> = HashMap::new();
    let expected_header = csv_header();

    let mut record = csv::StringRecord::new();
    let mut first = true;
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(map_csv_error(e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if first {
            first = false;
            check_header(&record, &expected_header, line)?;
            continue;
        }
        if record.len() != NUM_COLUMNS {
            return Err(ParseError::schema(
                line,
                format!("expected {NUM_COLUMNS} columns, found {}", record.len()),
            ));
        }
        let video_id = record[0].to_string();
        if video_id.is_empty() {
            return Err(ParseError::schema(line, "empty video_id"));
        }
        let frame_index: u64 = parse_field(&record[1], line, "frame_index")?;
        let image_height: u32 = parse_field(&record[2], line, "image_height")?;
        let image_width: u32 = parse_field(&record[3], line, "image_width")?;
        let mut points = Vec::with_capacity(NUM_POINTS);
        for p in 0..NUM_POINTS {
            let cx = 4 + 2 * p;
            let x = parse_coord(&record[cx], line, cx)?;
            let y = parse_coord(&record[cx + 1], line, cx + 1)?;
            points.push(Point2::new(x, y));
        }

        let label = manifest.get(&video_id).ok_or_else(|| ParseError::UnknownVideo {
            line,
            video_id: video_id.clone(),
        })?;
        if !seen.entry(video_id.clone()).or_default().insert(frame_index) {
            return Err(ParseError::DuplicateFrame {
                line,
                video_id,
                frame_index,
            });
        }
        let slot = *index_of.entry(video_id.clone()).or_insert_with(|| {
            sequences.push(LandmarkSequence {
                video_id: video_id.clone(),
                label,
                frames: Vec::new(),
            });
            sequences.len() - 1
        });
        sequences[slot].frames.push(LandmarkFrame {
            video_id,
            frame_index,
            image_height,
            image_width,
            points,
        });
    }
    if first {
        return Err(ParseError::schema(1, "missing header"));
    }
    for seq in &mut sequences {
        seq.frames.sort_by_key(|f| f.frame_index);
    }
    Ok(sequences)
}

/// Writes sequences in the landmark CSV format, header first.
///
/// Coordinates use the shortest representation that parses back to the same
/// `f64`, so `parse_csv(write_csv(s)) == s` for sorted, valid sequences.
pub fn write_csv<W: Write>(mut out: W, sequences: &[LandmarkSequence]) -> std::io::Result<()> {
    writeln!(out, "{}", csv_header())?;
    let mut line = String::with_capacity(2048);
    for seq in sequences {
        for frame in &seq.frames {
            line.clear();
            use std::fmt::Write as _;
            let _ = write!(
                line,
                "{},{},{},{}",
                frame.video_id, frame.frame_index, frame.image_height, frame.image_width
            );
            for p in &frame.points {
                let _ = write!(line, ",{},{}", p.x, p.y);
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
    }
    Ok(())
}

pub fn parse_manifest<R: Read>(stream: R) -> Result<LabelManifest, ParseError> {
    let mut rdr = reader(stream);
    let mut manifest = LabelManifest::new();
    let mut record = csv::StringRecord::new();
    let mut first = true;
    loop {
        match rdr.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(map_csv_error(e)),
        }
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if first {
            first = false;
            check_header(&record, MANIFEST_HEADER, line)?;
            continue;
        }
        if record.len() != 2 {
            return Err(ParseError::schema(line, format!("expected 2 columns, found {}", record.len())));
        }
        let label = match &record[1] {
            "0" => Label::Real,
            "1" => Label::Fake,
            other => return Err(ParseError::schema(line, format!("label must be 0 or 1, found {other:?}"))),
        };
        let id = record[0].to_string();
        if !manifest.insert(id.clone(), label) {
            return Err(ParseError::DuplicateLabel { line, video_id: id });
        }
    }
    if first {
        return Err(ParseError::schema(1, "missing header"));
    }
    Ok(manifest)
}

pub fn write_manifest<W: Write>(mut out: W, sequences: &[LandmarkSequence]) -> std::io::Result<()> {
    writeln!(out, "{MANIFEST_HEADER}")?;
    for seq in sequences {
        writeln!(out, "{},{}", seq.video_id, seq.label)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    PointCount,
    NonMonotonic,
    VideoIdMismatch,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub frame_index: u64,
}

/// Checks the per-frame invariants; an empty result means the sequence is valid.
pub fn validate_sequence(seq: &LandmarkSequence) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut prev: Option<u64> = None;
    for frame in &seq.frames {
        let at = |kind| Violation {
            kind,
            frame_index: frame.frame_index,
        };
        if frame.video_id != seq.video_id {
            out.push(at(ViolationKind::VideoIdMismatch));
        }
        if frame.points.len() != NUM_POINTS {
            out.push(at(ViolationKind::PointCount));
        }
        if frame.points.iter().any(|p| !p.x.is_finite() || !p.y.is_finite()) {
            out.push(at(ViolationKind::NonFinite));
        }
        if let Some(p) = prev {
            if frame.frame_index <= p {
                out.push(at(ViolationKind::NonMonotonic));
            }
        }
        prev = Some(frame.frame_index);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frame(video: &str, idx: u64, n: usize) -> LandmarkFrame {
        LandmarkFrame {
            video_id: video.into(),
            frame_index: idx,
            image_height: 480,
            image_width: 640,
            points: (0..n).map(|i| Point2::new(i as f64, idx as f64 - 3.5)).collect(),
        }
    }

    fn manifest(pairs: &[(&str, Label)]) -> LabelManifest {
        pairs.iter().map(|(id, l)| (id.to_string(), *l)).collect()
    }

    fn csv_of(frames: &[LandmarkFrame]) -> String {
        let seqs: Vec<_> = frames
            .iter()
            .map(|f| LandmarkSequence {
                video_id: f.video_id.clone(),
                label: Label::Real,
                frames: vec![f.clone()],
            })
            .collect();
        let mut buf = Vec::new();
        write_csv(&mut buf, &seqs).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn group_ranges_partition_all_points() {
        assert_eq!(FacialGroup::Chin.range(), 0..17);
        assert_eq!(FacialGroup::LeftEyebrow.range(), 17..22);
        assert_eq!(FacialGroup::RightEyebrow.range(), 22..27);
        assert_eq!(FacialGroup::NoseBridge.range(), 27..31);
        assert_eq!(FacialGroup::NoseBottom.range(), 31..36);
        assert_eq!(FacialGroup::LeftEye.range(), 36..42);
        assert_eq!(FacialGroup::RightEye.range(), 42..48);
        assert_eq!(FacialGroup::OuterLip.range(), 48..60);
        assert_eq!(FacialGroup::InnerLip.range(), 60..68);
        assert_eq!(GROUPS.iter().map(|g| g.1).sum::<usize>(), 68);
        assert_eq!(FacialGroup::of(67), Some(FacialGroup::InnerLip));
        assert_eq!(FacialGroup::of(68), None);
    }

    #[test]
    fn header_has_140_columns() {
        assert_eq!(csv_header().split(',').count(), NUM_COLUMNS);
        assert!(csv_header().ends_with("p67_x,p67_y"));
    }

    #[test]
    fn minimal_two_row_csv() {
        let text = csv_of(&[frame("v1", 0, 68), frame("v1", 1, 68)]);
        let seqs = parse_csv(text.as_bytes(), &manifest(&[("v1", Label::Real)])).unwrap();
        assert_eq!(seqs.len(), 1);
        assert_eq!(seqs[0].frames.len(), 2);
        assert_eq!(seqs[0].label, Label::Real);
        assert!(validate_sequence(&seqs[0]).is_empty());
    }

    #[test]
    fn crlf_line_endings_are_accepted() {
        let text = csv_of(&[frame("v1", 0, 68), frame("v1", 1, 68)]).replace('\n', "\r\n");
        let seqs = parse_csv(text.as_bytes(), &manifest(&[("v1", Label::Fake)])).unwrap();
        assert_eq!(seqs[0].frames.len(), 2);
        assert_eq!(seqs[0].label, Label::Fake);
    }

    #[test]
    fn short_row_is_a_schema_error_with_line() {
        let mut text = csv_of(&[frame("v1", 0, 68), frame("v1", 1, 68)]);
        // Truncate the last row to 135 fields.
        let rows: Vec<&str> = text.lines().collect();
        let short: Vec<&str> = rows[2].split(',').take(135).collect();
        text = format!("{}\n{}\n{}\n", rows[0], rows[1], short.join(","));
        match parse_csv(text.as_bytes(), &manifest(&[("v1", Label::Real)])) {
            Err(ParseError::Schema { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("135"), "{message}");
            }
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn non_numeric_cell_is_a_schema_error() {
        let text = csv_of(&[frame("v1", 0, 68)]).replacen(",-3.5,", ",abc,", 1);
        let err = parse_csv(text.as_bytes(), &manifest(&[("v1", Label::Real)])).unwrap_err();
        assert!(matches!(err, ParseError::Schema { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn wrong_header_rejected() {
        let text = csv_of(&[frame("v1", 0, 68)]).replacen("video_id", "vid", 1);
        let err = parse_csv(text.as_bytes(), &manifest(&[("v1", Label::Real)])).unwrap_err();
        assert!(matches!(err, ParseError::Schema { line: 1, .. }));
    }

    #[test]
    fn duplicate_frame_rejected() {
        let text = csv_of(&[frame("v1", 0, 68), frame("v1", 0, 68)]);
        let err = parse_csv(text.as_bytes(), &manifest(&[("v1", Label::Real)])).unwrap_err();
        assert!(matches!(err, ParseError::DuplicateFrame { line: 3, frame_index: 0, .. }));
    }

    #[test]
    fn unknown_video_rejected() {
        let text = csv_of(&[frame("v9", 0, 68)]);
        let err = parse_csv(text.as_bytes(), &manifest(&[("v1", Label::Real)])).unwrap_err();
        assert!(matches!(err, ParseError::UnknownVideo { line: 2, .. }));
    }

    #[test]
    fn interleaved_videos_match_naive_group_by() {
        let rows = [frame("v1", 1, 68), frame("v2", 0, 68), frame("v1", 0, 68), frame("v2", 1, 68)];
        let text = csv_of(&rows);
        let m = manifest(&[("v1", Label::Real), ("v2", Label::Fake)]);
        let seqs = parse_csv(text.as_bytes(), &m).unwrap();

        // Naive oracle: for each distinct id in first-appearance order, filter then sort.
        let mut ids: Vec<&str> = Vec::new();
        for r in &rows {
            if !ids.contains(&r.video_id.as_str()) {
                ids.push(&r.video_id);
            }
        }
        assert_eq!(seqs.len(), ids.len());
        for (seq, id) in seqs.iter().zip(ids) {
            let mut expected: Vec<LandmarkFrame> = rows.iter().filter(|r| r.video_id == id).cloned().collect();
            expected.sort_by_key(|f| f.frame_index);
            assert_eq!(seq.video_id, id);
            assert_eq!(seq.frames, expected);
            assert_eq!(seq.frames.len(), 2);
        }
        assert_eq!(seqs[1].label, Label::Fake);
    }

    #[test]
    fn manifest_parsing() {
        let m = parse_manifest("video_id,label\na,0\nb,1\n".as_bytes()).unwrap();
        assert_eq!(m.get("a"), Some(Label::Real));
        assert_eq!(m.get("b"), Some(Label::Fake));
        assert!(matches!(
            parse_manifest("video_id,label\na,2\n".as_bytes()),
            Err(ParseError::Schema { line: 2, .. })
        ));
        assert!(matches!(
            parse_manifest("video_id,label\na,0\na,1\n".as_bytes()),
            Err(ParseError::DuplicateLabel { line: 3, .. })
        ));
    }

    #[test]
    fn validation_reports_each_failed_invariant() {
        let ok = LandmarkSequence {
            video_id: "v".into(),
            label: Label::Real,
            frames: vec![frame("v", 0, 68), frame("v", 1, 68)],
        };
        assert!(validate_sequence(&ok).is_empty());

        let short = LandmarkSequence {
            frames: vec![frame("v", 0, 68), frame("v", 1, 67)],
            ..ok.clone()
        };
        assert_eq!(
            validate_sequence(&short),
            vec![Violation {
                kind: ViolationKind::PointCount,
                frame_index: 1
            }]
        );

        let unordered = LandmarkSequence {
            frames: vec![frame("v", 0, 68), frame("v", 2, 68), frame("v", 1, 68)],
            ..ok.clone()
        };
        let v = validate_sequence(&unordered);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].kind, ViolationKind::NonMonotonic);
        assert_eq!(v[0].frame_index, 1);

        let mixed = LandmarkSequence {
            frames: vec![frame("v", 0, 68), frame("w", 1, 68)],
            ..ok
        };
        assert_eq!(validate_sequence(&mixed)[0].kind, ViolationKind::VideoIdMismatch);
    }
}
