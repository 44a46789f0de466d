//! File formats: jsonl detections (read/write), COCO results (read only),
//! corpus metadata, frame lists and category maps.
//!
//! Output files are written to a temporary file next to the destination and
//! renamed into place, so a failed run never leaves a partial file behind.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bbox::BBox;
use crate::category::CategoryMap;
use crate::detections::{DetectionSet, FrameKey, GroundTruthSet};
use crate::error::{Error, Result};

/// One box per line in the jsonl interchange format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub video_id: String,
    pub frame_id: u64,
    pub detector_id: String,
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub score: f64,
    pub category: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consensus_n: Option<u32>,
}

impl DetectionRecord {
    fn from_box(key: &FrameKey, b: &BBox, fallback_detector: &str) -> Self {
        DetectionRecord {
            video_id: key.video_id.clone(),
            frame_id: key.frame_id,
            detector_id: b
                .detector_id
                .clone()
                .unwrap_or_else(|| fallback_detector.to_string()),
            x1: b.x1,
            y1: b.y1,
            x2: b.x2,
            y2: b.y2,
            score: b.score,
            category: b.category.clone(),
            track_id: b.track_id.clone(),
            consensus_n: b.consensus_n,
        }
    }

    fn into_parts(self) -> (FrameKey, BBox) {
        (
            FrameKey::new(self.video_id, self.frame_id),
            BBox {
                x1: self.x1,
                y1: self.y1,
                x2: self.x2,
                y2: self.y2,
                score: self.score,
                category: self.category,
                detector_id: Some(self.detector_id),
                track_id: self.track_id,
                consensus_n: self.consensus_n,
            },
        )
    }
}

/// COCO image id to frame lookup for importing COCO-style results.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageIndex {
    frames: HashMap<u64, FrameKey>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageEntry {
    image_id: u64,
    video_id: String,
    frame_id: u64,
}

impl ImageIndex {
    pub fn insert(&mut self, image_id: u64, key: FrameKey) {
        self.frames.insert(image_id, key);
    }

    /// Reads `[{"image_id": 1, "video_id": "v", "frame_id": 0}, ...]`.
    pub fn from_json(reader: impl Read) -> Result<Self> {
        let entries: Vec<ImageEntry> =
            serde_json::from_reader(reader).map_err(|e| Error::Parse {
                location: format!("line {}, column {}", e.line(), e.column()),
                reason: e.to_string(),
            })?;
        let mut idx = ImageIndex::default();
        for e in entries {
            if idx.frames.contains_key(&e.image_id) {
                return Err(Error::DuplicateRecord(format!("image_id {}", e.image_id)));
            }
            idx.insert(e.image_id, FrameKey::new(e.video_id, e.frame_id));
        }
        Ok(idx)
    }
}

#[derive(Deserialize)]
struct CocoResult {
    image_id: u64,
    bbox: [f64; 4],
    score: f64,
    category_id: serde_json::Value,
}

#[derive(Debug, Clone)]
pub enum DetectionFormat {
    Jsonl,
    /// Results array with a sidecar image index. COCO results carry no
    /// detector, so one is supplied here.
    CocoResults {
        images: ImageIndex,
        detector_id: String,
    },
}

type DupKey = (String, u64, String, String, [u64; 4]);

fn dup_key(key: &FrameKey, b: &BBox) -> DupKey {
    (
        key.video_id.clone(),
        key.frame_id,
        b.detector_id.clone().unwrap_or_default(),
        b.category.clone(),
        [b.x1.to_bits(), b.y1.to_bits(), b.x2.to_bits(), b.y2.to_bits()],
    )
}

fn add_record(
    set: &mut DetectionSet,
    seen: &mut HashSet<DupKey>,
    location: String,
    key: FrameKey,
    b: BBox,
) -> Result<()> {
    b.validate().map_err(|e| Error::InvariantViolation {
        location: location.clone(),
        reason: e.to_string(),
    })?;
    if !seen.insert(dup_key(&key, &b)) {
        return Err(Error::DuplicateRecord(location));
    }
    set.push(key, b);
    Ok(())
}

/// Source id of a parsed set: its single detector id, or the sorted ids
/// joined with `+` when the file mixes detectors.
fn infer_source_id(set: &DetectionSet) -> String {
    let ids: BTreeSet<&str> = set
        .boxes()
        .filter_map(|(_, b)| b.detector_id.as_deref())
        .collect();
    ids.into_iter().collect::<Vec<_>>().join("+")
}

/// Reads and validates a detection stream.
pub fn parse_detections(reader: impl BufRead, format: &DetectionFormat) -> Result<DetectionSet> {
    let mut set = DetectionSet::default();
    let mut seen = HashSet::new();
    match format {
        DetectionFormat::Jsonl => {
            for (i, line) in reader.lines().enumerate() {
                let location = format!("line {}", i + 1);
                let line = line.map_err(|e| Error::Parse {
                    location: location.clone(),
                    reason: e.to_string(),
                })?;
                if line.trim().is_empty() {
                    continue;
                }
                let rec: DetectionRecord =
                    serde_json::from_str(&line).map_err(|e| Error::Parse {
                        location: format!("{location}, column {}", e.column()),
                        reason: e.to_string(),
                    })?;
                let (key, b) = rec.into_parts();
                add_record(&mut set, &mut seen, location, key, b)?;
            }
            set.source_id = infer_source_id(&set);
        }
        DetectionFormat::CocoResults { images, detector_id } => {
            let results: Vec<CocoResult> =
                serde_json::from_reader(reader).map_err(|e| Error::Parse {
                    location: format!("line {}, column {}", e.line(), e.column()),
                    reason: e.to_string(),
                })?;
            for (i, r) in results.into_iter().enumerate() {
                let location = format!("result {i}");
                let key = images.frames.get(&r.image_id).cloned().ok_or_else(|| {
                    Error::InvariantViolation {
                        location: location.clone(),
                        reason: format!("image_id {} missing from image index", r.image_id),
                    }
                })?;
                let category = match r.category_id {
                    serde_json::Value::String(s) => s,
                    serde_json::Value::Number(n) => n.to_string(),
                    other => {
                        return Err(Error::Parse {
                            location,
                            reason: format!("category_id must be a number or string, got {other}"),
                        })
                    }
                };
                let [x, y, w, h] = r.bbox;
                let b = BBox {
                    x1: x,
                    y1: y,
                    x2: x + w,
                    y2: y + h,
                    score: r.score,
                    category,
                    detector_id: Some(detector_id.clone()),
                    track_id: None,
                    consensus_n: None,
                };
                add_record(&mut set, &mut seen, location, key, b)?;
            }
            set.source_id = detector_id.clone();
        }
    }
    Ok(set)
}

/// Writes records ordered by video, frame, descending score and geometry.
pub fn write_jsonl(dets: &DetectionSet, mut w: impl Write) -> std::io::Result<()> {
    for (key, frame) in &dets.frames {
        let mut boxes: Vec<&BBox> = frame.boxes.iter().collect();
        boxes.sort_by(|a, b| a.cmp_rank(b));
        for b in boxes {
            let rec = DetectionRecord::from_box(key, b, &dets.source_id);
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

/// Writes `contents` to `path` through a temporary file in the same directory.
pub fn write_atomic(
    path: &Path,
    contents: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        contents(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Writes merged or fused detections as training labels: continuous scores
/// plus the consensus count of every box.
pub fn export_soft_targets(dets: &DetectionSet, path: &Path) -> Result<()> {
    write_atomic(path, |w| write_jsonl(dets, w))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn read_detections(path: &Path, format: &DetectionFormat) -> Result<DetectionSet> {
    let set = parse_detections(open(path)?, format);
    set.map_err(|e| match e {
        Error::Parse { location, reason } => Error::Parse {
            location: format!("{}: {location}", path.display()),
            reason,
        },
        Error::InvariantViolation { location, reason } => Error::InvariantViolation {
            location: format!("{}: {location}", path.display()),
            reason,
        },
        Error::DuplicateRecord(location) => {
            Error::DuplicateRecord(format!("{}: {location}", path.display()))
        }
        other => other,
    })
}

/// Ground truth stored as jsonl (detector id and score are ignored).
pub fn read_ground_truth(path: &Path) -> Result<GroundTruthSet> {
    GroundTruthSet::from_detections(&read_detections(path, &DetectionFormat::Jsonl)?)
}

pub fn read_image_index(path: &Path) -> Result<ImageIndex> {
    ImageIndex::from_json(open(path)?)
}

pub fn read_category_map(path: &Path) -> Result<CategoryMap> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    CategoryMap::from_text(&text)
}

/// Per-video frame count and frame size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoMeta {
    pub frames: u64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusMeta {
    pub videos: BTreeMap<String, VideoMeta>,
}

impl CorpusMeta {
    pub fn validate(&self) -> Result<()> {
        for (vid, v) in &self.videos {
            if v.frames == 0 || !(v.width > 0.0 && v.height > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "video `{vid}` needs positive frame count and dimensions"
                )));
            }
        }
        Ok(())
    }

    pub fn video_lengths(&self) -> BTreeMap<String, u64> {
        self.videos.iter().map(|(k, v)| (k.clone(), v.frames)).collect()
    }

    pub fn from_json(reader: impl Read) -> Result<Self> {
        let meta: CorpusMeta = serde_json::from_reader(reader).map_err(|e| Error::Parse {
            location: format!("line {}, column {}", e.line(), e.column()),
            reason: e.to_string(),
        })?;
        meta.validate()?;
        Ok(meta)
    }
}

pub fn read_meta(path: &Path) -> Result<CorpusMeta> {
    CorpusMeta::from_json(open(path)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)?;
        w.write_all(b"\n")
    })
}

/// Frame lists are text, one `video_id frame_id` pair per line.
pub fn write_frame_list(frames: &BTreeSet<FrameKey>, mut w: impl Write) -> std::io::Result<()> {
    for k in frames {
        writeln!(w, "{} {}", k.video_id, k.frame_id)?;
    }
    Ok(())
}

pub fn parse_frame_list(text: &str) -> Result<BTreeSet<FrameKey>> {
    let mut out = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |reason: String| Error::Parse {
            location: format!("line {}", i + 1),
            reason,
        };
        let mut cols = line.split_whitespace();
        let (Some(v), Some(f), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(err(format!("expected `video_id frame_id`, got `{line}`")));
        };
        let f: u64 = f.parse().map_err(|e| err(format!("bad frame id `{f}`: {e}")))?;
        out.insert(FrameKey::new(v, f));
    }
    Ok(out)
}

pub fn read_frame_list(path: &Path) -> Result<BTreeSet<FrameKey>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_frame_list(&text)
}
