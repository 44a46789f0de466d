//! Per-frame and per-corpus containers.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::bbox::BBox;
use crate::error::{Error, Result};

/// `(video_id, frame_id)` key. Orders by video first, then frame index.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FrameKey {
    pub video_id: String,
    pub frame_id: u64,
}

impl FrameKey {
    pub fn new(video_id: impl Into<String>, frame_id: u64) -> Self {
        FrameKey {
            video_id: video_id.into(),
            frame_id,
        }
    }
}

impl fmt::Display for FrameKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.video_id, self.frame_id)
    }
}

/// All boxes for one frame. Boxes from several detectors are told apart by
/// their `detector_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    pub video_id: String,
    pub frame_id: u64,
    pub boxes: Vec<BBox>,
}

impl FrameDetections {
    pub fn new(key: FrameKey, boxes: Vec<BBox>) -> Self {
        FrameDetections {
            video_id: key.video_id,
            frame_id: key.frame_id,
            boxes,
        }
    }

    pub fn empty(key: FrameKey) -> Self {
        Self::new(key, Vec::new())
    }

    pub fn key(&self) -> FrameKey {
        FrameKey::new(self.video_id.clone(), self.frame_id)
    }

    /// Boxes grouped by detector id, groups ordered by id. Boxes without a
    /// detector id are grouped under the empty string.
    pub fn by_detector(&self) -> BTreeMap<&str, Vec<&BBox>> {
        let mut groups: BTreeMap<&str, Vec<&BBox>> = BTreeMap::new();
        for b in &self.boxes {
            groups
                .entry(b.detector_id.as_deref().unwrap_or(""))
                .or_default()
                .push(b);
        }
        groups
    }

    /// Sorts boxes into canonical output order (descending score, then geometry).
    pub fn sort_canonical(&mut self) {
        self.boxes.sort_by(BBox::cmp_rank);
    }
}

/// A corpus of frames from one source.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionSet {
    pub source_id: String,
    pub frames: BTreeMap<FrameKey, FrameDetections>,
}

impl DetectionSet {
    pub fn new(source_id: impl Into<String>) -> Self {
        DetectionSet {
            source_id: source_id.into(),
            frames: BTreeMap::new(),
        }
    }

    /// Appends a box to its frame, creating the frame on first use.
    pub fn push(&mut self, key: FrameKey, bbox: BBox) {
        self.frames
            .entry(key.clone())
            .or_insert_with(|| FrameDetections::empty(key))
            .boxes
            .push(bbox);
    }

    pub fn insert_frame(&mut self, frame: FrameDetections) {
        self.frames.insert(frame.key(), frame);
    }

    pub fn num_boxes(&self) -> usize {
        self.frames.values().map(|f| f.boxes.len()).sum()
    }

    pub fn boxes(&self) -> impl Iterator<Item = (&FrameKey, &BBox)> {
        self.frames
            .iter()
            .flat_map(|(k, f)| f.boxes.iter().map(move |b| (k, b)))
    }

    /// Tags every box that has no detector id with this set's source id.
    pub fn tag_boxes(&mut self) {
        for frame in self.frames.values_mut() {
            for b in &mut frame.boxes {
                if b.detector_id.is_none() {
                    b.detector_id = Some(self.source_id.clone());
                }
            }
        }
    }

    /// Copy without frames that hold no boxes.
    pub fn without_empty_frames(&self) -> DetectionSet {
        DetectionSet {
            source_id: self.source_id.clone(),
            frames: self
                .frames
                .iter()
                .filter(|(_, f)| !f.boxes.is_empty())
                .map(|(k, f)| (k.clone(), f.clone()))
                .collect(),
        }
    }

    /// Frames restricted to `keys`.
    pub fn restrict_to(&self, keys: &BTreeSet<FrameKey>) -> DetectionSet {
        DetectionSet {
            source_id: self.source_id.clone(),
            frames: self
                .frames
                .iter()
                .filter(|(k, _)| keys.contains(k))
                .map(|(k, f)| (k.clone(), f.clone()))
                .collect(),
        }
    }
}

/// Labeled boxes per frame. Scores are pinned to 1.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruthSet {
    pub frames: BTreeMap<FrameKey, Vec<BBox>>,
}

impl GroundTruthSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a frame, forcing scores to 1 and rejecting repeated track ids.
    pub fn insert_frame(&mut self, key: FrameKey, boxes: Vec<BBox>) -> Result<()> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::with_capacity(boxes.len());
        for mut b in boxes {
            if let Some(t) = &b.track_id {
                if !seen.insert(t.clone()) {
                    return Err(Error::DuplicateTrack {
                        frame: key,
                        track_id: t.clone(),
                    });
                }
            }
            b.score = 1.0;
            b.detector_id = None;
            b.consensus_n = None;
            b.validate()?;
            out.push(b);
        }
        self.frames.insert(key, out);
        Ok(())
    }

    /// Reads ground truth out of a detection set (for example a parsed jsonl
    /// file whose detector id is just a label).
    pub fn from_detections(dets: &DetectionSet) -> Result<Self> {
        let mut gt = GroundTruthSet::new();
        for (key, frame) in &dets.frames {
            gt.insert_frame(key.clone(), frame.boxes.clone())?;
        }
        Ok(gt)
    }

    /// Ground truth as a detection set with the given source id.
    pub fn to_detections(&self, source_id: &str) -> DetectionSet {
        let mut set = DetectionSet::new(source_id);
        for (key, boxes) in &self.frames {
            let boxes = boxes
                .iter()
                .cloned()
                .map(|b| b.with_detector(source_id))
                .collect();
            set.insert_frame(FrameDetections::new(key.clone(), boxes));
        }
        set
    }

    pub fn num_boxes(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    /// Frame count per video, taken as the largest frame index plus one.
    pub fn video_lengths(&self) -> BTreeMap<String, u64> {
        let mut out: BTreeMap<String, u64> = BTreeMap::new();
        for key in self.frames.keys() {
            let n = out.entry(key.video_id.clone()).or_default();
            *n = (*n).max(key.frame_id + 1);
        }
        out
    }
}
