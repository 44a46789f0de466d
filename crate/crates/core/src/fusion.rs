//! Two-source fusion and ground-truth override.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::bbox::BBox;
use crate::detections::{DetectionSet, FrameDetections, FrameKey, GroundTruthSet};
use crate::ensemble::{build_mutual_tuples, match_nearest_neighbors, merge_tuples, FrameBoxes};
use crate::error::{Error, Result};
use crate::nms::nms;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuseConfig {
    pub iou_thresh: f64,
    /// Factor applied to the score of every box left without a partner.
    pub unmatched_downweight: f64,
}

impl Default for FuseConfig {
    fn default() -> Self {
        FuseConfig {
            iou_thresh: 0.3,
            unmatched_downweight: 0.5,
        }
    }
}

impl FuseConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_thresh > 0.0 && self.iou_thresh < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "iou_thresh {} outside (0, 1)",
                self.iou_thresh
            )));
        }
        if !(self.unmatched_downweight > 0.0 && self.unmatched_downweight <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "unmatched_downweight {} outside (0, 1]",
                self.unmatched_downweight
            )));
        }
        Ok(())
    }
}

fn fuse_category(a: Vec<&BBox>, b: Vec<&BBox>, cfg: &FuseConfig) -> Vec<BBox> {
    // Side labels rather than the boxes' own detector ids: both sides may
    // carry the same id (or none at all).
    let groups = BTreeMap::from([("a", a), ("b", b)]);
    let frame = FrameBoxes::from_groups(groups);
    let neighbors = match_nearest_neighbors(&frame, cfg.iou_thresh);
    let tuples = build_mutual_tuples(&frame, &neighbors);
    let mut merged = merge_tuples(&frame, &tuples);
    for m in &mut merged {
        if m.consensus_n == Some(1) {
            m.score *= cfg.unmatched_downweight;
        }
    }
    nms(merged, cfg.iou_thresh)
}

/// Merges mutually nearest pairs of boxes across the two frames, downweights
/// every box left unmatched, then applies NMS at the fusion threshold.
pub fn fuse_pair(a: &FrameDetections, b: &FrameDetections, cfg: &FuseConfig) -> Result<FrameDetections> {
    if a.video_id != b.video_id || a.frame_id != b.frame_id {
        return Err(Error::FrameMismatch {
            left: a.key(),
            right: b.key(),
        });
    }
    let mut by_category: BTreeMap<&str, (Vec<&BBox>, Vec<&BBox>)> = BTreeMap::new();
    for x in &a.boxes {
        by_category.entry(&x.category).or_default().0.push(x);
    }
    for x in &b.boxes {
        by_category.entry(&x.category).or_default().1.push(x);
    }
    let mut out = FrameDetections::empty(a.key());
    for (_, (left, right)) in by_category {
        out.boxes.extend(fuse_category(left, right, cfg));
    }
    out.sort_canonical();
    Ok(out)
}

/// [`fuse_pair`] over the union of frames; a frame missing from one side is
/// fused against an empty frame.
pub fn fuse_sets(
    a: &DetectionSet,
    b: &DetectionSet,
    cfg: &FuseConfig,
    source_id: &str,
) -> Result<DetectionSet> {
    cfg.validate()?;
    let keys: BTreeSet<&FrameKey> = a.frames.keys().chain(b.frames.keys()).collect();
    let fused: Vec<FrameDetections> = keys
        .into_par_iter()
        .map(|key| {
            let empty = FrameDetections::empty(key.clone());
            let fa = a.frames.get(key).unwrap_or(&empty);
            let fb = b.frames.get(key).unwrap_or(&empty);
            fuse_pair(fa, fb, cfg)
        })
        .collect::<Result<_>>()?;
    let mut out = DetectionSet::new(source_id);
    for f in fused {
        out.insert_frame(f);
    }
    Ok(out)
}

/// Replaces labeled frames by their ground truth (score 1). Other frames
/// pass through unchanged.
pub fn override_with_ground_truth(
    dets: &DetectionSet,
    gt: &GroundTruthSet,
    labeled_frames: &BTreeSet<FrameKey>,
) -> Result<DetectionSet> {
    let mut out = dets.clone();
    for key in labeled_frames {
        let boxes = gt
            .frames
            .get(key)
            .ok_or_else(|| Error::MissingGroundTruth(key.clone()))?;
        let boxes = boxes
            .iter()
            .map(|b| BBox {
                score: 1.0,
                detector_id: None,
                consensus_n: None,
                ..b.clone()
            })
            .collect();
        let mut frame = FrameDetections::new(key.clone(), boxes);
        frame.sort_canonical();
        out.insert_frame(frame);
    }
    Ok(out)
}
