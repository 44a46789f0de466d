//! Greedy consensus merging of several detectors' boxes within a frame.
//!
//! The procedure per frame and category:
//!
//! 1. every box finds, in each *other* detector, the box with highest IOU,
//!    provided that IOU reaches the threshold;
//! 2. each box anchors a tuple made of itself and those neighbors for which
//!    the nearest-neighbor relation is mutual with the anchor;
//! 3. tuples are consumed greedily by descending cardinality, skipping any
//!    tuple that shares a box with an earlier one, and each surviving tuple is
//!    averaged into one box whose consensus count is its cardinality;
//! 4. scores are adjusted according to [`MergePolicy`] and the result goes
//!    through NMS at the same threshold.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::bbox::{iou, BBox};
use crate::detections::{DetectionSet, FrameDetections, FrameKey};
use crate::error::{Error, Result};
use crate::nms::nms;

/// How merged scores are turned into output scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MergePolicy {
    /// Consensus reweighting with `score^(1/beta^(n - n_ref))`.
    #[default]
    Reweight,
    /// Averaged scores pass through untouched.
    KeepAll,
    /// Boxes seen by a single detector are removed; others keep averaged scores.
    DropSingletons,
}

impl MergePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            MergePolicy::Reweight => "reweight",
            MergePolicy::KeepAll => "keep-all",
            MergePolicy::DropSingletons => "drop-singletons",
        }
    }
}

impl fmt::Display for MergePolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MergePolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reweight" => Ok(MergePolicy::Reweight),
            "keep-all" => Ok(MergePolicy::KeepAll),
            "drop-singletons" => Ok(MergePolicy::DropSingletons),
            other => Err(Error::InvalidConfig(format!("unknown merge policy `{other}`"))),
        }
    }
}

impl serde::Serialize for MergePolicy {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> serde::Deserialize<'de> for MergePolicy {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MergeConfig {
    pub iou_thresh: f64,
    pub beta: f64,
    /// Consensus count left unchanged by reweighting.
    pub n_ref: u32,
    pub policy: MergePolicy,
}

impl Default for MergeConfig {
    fn default() -> Self {
        MergeConfig {
            iou_thresh: 0.7,
            beta: 3.0,
            n_ref: 2,
            policy: MergePolicy::Reweight,
        }
    }
}

impl MergeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.iou_thresh > 0.0 && self.iou_thresh < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "iou_thresh {} outside (0, 1)",
                self.iou_thresh
            )));
        }
        if !(self.beta >= 1.0 && self.beta.is_finite()) {
            return Err(Error::InvalidConfig(format!("beta {} below 1", self.beta)));
        }
        if self.n_ref < 1 {
            return Err(Error::InvalidConfig("n_ref must be at least 1".into()));
        }
        Ok(())
    }
}

/// Boxes of one frame and category, indexed, with the detector each came from.
///
/// Detectors are ordered by id, so detector indices and every order derived
/// from them do not depend on input order.
#[derive(Debug, Clone)]
pub struct FrameBoxes<'a> {
    detectors: Vec<&'a str>,
    boxes: Vec<&'a BBox>,
    owner: Vec<usize>,
}

impl<'a> FrameBoxes<'a> {
    /// Groups boxes by `detector_id` (missing ids form one group).
    pub fn from_boxes(boxes: impl IntoIterator<Item = &'a BBox>) -> Self {
        let mut groups: BTreeMap<&'a str, Vec<&'a BBox>> = BTreeMap::new();
        for b in boxes {
            groups
                .entry(b.detector_id.as_deref().unwrap_or(""))
                .or_default()
                .push(b);
        }
        Self::from_groups(groups)
    }

    /// Uses the given grouping regardless of the boxes' own detector ids.
    pub fn from_groups(groups: BTreeMap<&'a str, Vec<&'a BBox>>) -> Self {
        let mut fb = FrameBoxes {
            detectors: Vec::with_capacity(groups.len()),
            boxes: Vec::new(),
            owner: Vec::new(),
        };
        for (d, (id, group)) in groups.into_iter().enumerate() {
            fb.detectors.push(id);
            for b in group {
                fb.boxes.push(b);
                fb.owner.push(d);
            }
        }
        fb
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn num_detectors(&self) -> usize {
        self.detectors.len()
    }

    pub fn get(&self, i: usize) -> &'a BBox {
        self.boxes[i]
    }

    pub fn detector_of(&self, i: usize) -> usize {
        self.owner[i]
    }

    pub fn detector_id(&self, d: usize) -> &'a str {
        self.detectors[d]
    }
}

/// For each box and each detector, the best-matching box of that detector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NeighborMap {
    nearest: Vec<Vec<Option<usize>>>,
}

impl NeighborMap {
    /// Nearest box of `detector` to box `i`; always `None` for the box's own detector.
    pub fn nearest(&self, i: usize, detector: usize) -> Option<usize> {
        self.nearest[i][detector]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.nearest[i].iter().filter_map(|n| *n)
    }
}

/// Candidate `a` beats `b` as nearest neighbor: higher IOU, then higher
/// score, then lexicographically smaller geometry.
fn better_neighbor(iou_a: f64, a: &BBox, iou_b: f64, b: &BBox) -> bool {
    iou_a
        .total_cmp(&iou_b)
        .then(a.score.total_cmp(&b.score))
        .then_with(|| b.cmp_geometry(a))
        == Ordering::Greater
}

/// Step 1: per box and per other detector, the highest-IOU box if that IOU
/// is at least `iou_thresh`.
pub fn match_nearest_neighbors(frame: &FrameBoxes<'_>, iou_thresh: f64) -> NeighborMap {
    let n = frame.len();
    let k = frame.num_detectors();
    let mut best: Vec<Vec<Option<(usize, f64)>>> = vec![vec![None; k]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let (di, dj) = (frame.owner[i], frame.owner[j]);
            if di == dj {
                continue;
            }
            let v = iou(frame.boxes[i], frame.boxes[j]);
            if v < iou_thresh {
                continue;
            }
            for (from, to, d) in [(i, j, dj), (j, i, di)] {
                let slot = &mut best[from][d];
                let replace = match *slot {
                    None => true,
                    Some((cur, cur_iou)) => {
                        better_neighbor(v, frame.boxes[to], cur_iou, frame.boxes[cur])
                    }
                };
                if replace {
                    *slot = Some((to, v));
                }
            }
        }
    }
    NeighborMap {
        nearest: best
            .into_iter()
            .map(|row| row.into_iter().map(|c| c.map(|(j, _)| j)).collect())
            .collect(),
    }
}

/// An anchor box plus the neighbors that are mutually nearest with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MutualTuple {
    pub anchor: usize,
    /// Box indices in detector order, anchor included.
    pub members: Vec<usize>,
}

impl MutualTuple {
    pub fn cardinality(&self) -> usize {
        self.members.len()
    }
}

/// Step 2: one tuple per anchor box. Non-anchor members need only be mutual
/// with the anchor, not with each other.
pub fn build_mutual_tuples(frame: &FrameBoxes<'_>, neighbors: &NeighborMap) -> Vec<MutualTuple> {
    (0..frame.len())
        .map(|anchor| {
            let da = frame.owner[anchor];
            let mut members: Vec<usize> = neighbors
                .neighbors(anchor)
                .filter(|&j| neighbors.nearest(j, da) == Some(anchor))
                .chain(std::iter::once(anchor))
                .collect();
            members.sort_by_key(|&m| frame.owner[m]);
            MutualTuple { anchor, members }
        })
        .collect()
}

fn mean_score(frame: &FrameBoxes<'_>, t: &MutualTuple) -> f64 {
    t.members.iter().map(|&m| frame.boxes[m].score).sum::<f64>() / t.members.len() as f64
}

/// Averages the members of a tuple into one box with `consensus_n` set.
fn average(frame: &FrameBoxes<'_>, members: &[usize]) -> BBox {
    let n = members.len() as f64;
    let mut acc = [0.0f64; 5];
    for &m in members {
        let b = frame.boxes[m];
        for (a, v) in acc.iter_mut().zip([b.x1, b.y1, b.x2, b.y2, b.score]) {
            *a += v;
        }
    }
    let first = frame.boxes[members[0]];
    BBox {
        x1: acc[0] / n,
        y1: acc[1] / n,
        x2: acc[2] / n,
        y2: acc[3] / n,
        score: (acc[4] / n).clamp(0.0, 1.0),
        category: first.category.clone(),
        detector_id: None,
        track_id: None,
        consensus_n: Some(members.len() as u32),
    }
}

/// Step 3: greedy consumption in descending cardinality.
///
/// Equal cardinalities are ordered by descending mean member score, then by
/// the anchor's geometry, score and detector id.
pub fn merge_tuples(frame: &FrameBoxes<'_>, tuples: &[MutualTuple]) -> Vec<BBox> {
    let means: Vec<f64> = tuples.iter().map(|t| mean_score(frame, t)).collect();
    let mut order: Vec<usize> = (0..tuples.len()).collect();
    order.sort_by(|&a, &b| {
        let (ta, tb) = (&tuples[a], &tuples[b]);
        let (aa, ab) = (frame.boxes[ta.anchor], frame.boxes[tb.anchor]);
        tb.cardinality()
            .cmp(&ta.cardinality())
            .then(means[b].total_cmp(&means[a]))
            .then_with(|| aa.cmp_geometry(ab))
            .then(ab.score.total_cmp(&aa.score))
            .then_with(|| {
                frame.detectors[frame.owner[ta.anchor]].cmp(frame.detectors[frame.owner[tb.anchor]])
            })
    });

    let mut consumed = vec![false; frame.len()];
    let mut out = Vec::new();
    for idx in order {
        let t = &tuples[idx];
        if t.members.iter().any(|&m| consumed[m]) {
            continue;
        }
        for &m in &t.members {
            consumed[m] = true;
        }
        out.push(average(frame, &t.members));
    }
    out
}

/// `score^(1 / beta^(n - n_ref))`.
pub fn reweight_confidence(score: f64, n: u32, cfg: &MergeConfig) -> f64 {
    let exponent = 1.0 / cfg.beta.powi(n as i32 - cfg.n_ref as i32);
    score.powf(exponent).clamp(0.0, 1.0)
}

fn merge_category(boxes: &[&BBox], cfg: &MergeConfig) -> Vec<BBox> {
    let frame = FrameBoxes::from_boxes(boxes.iter().copied());
    let neighbors = match_nearest_neighbors(&frame, cfg.iou_thresh);
    let tuples = build_mutual_tuples(&frame, &neighbors);
    let mut merged = merge_tuples(&frame, &tuples);
    match cfg.policy {
        MergePolicy::Reweight => {
            for b in &mut merged {
                b.score = reweight_confidence(b.score, b.consensus_n.unwrap_or(1), cfg);
            }
        }
        MergePolicy::KeepAll => {}
        MergePolicy::DropSingletons => merged.retain(|b| b.consensus_n.unwrap_or(1) > 1),
    }
    nms(merged, cfg.iou_thresh)
}

/// Full merge for one frame. Boxes are grouped into detectors by
/// `detector_id`; categories are merged independently.
pub fn ensemble_frame(frame: &FrameDetections, cfg: &MergeConfig) -> FrameDetections {
    let mut by_category: BTreeMap<&str, Vec<&BBox>> = BTreeMap::new();
    for b in &frame.boxes {
        by_category.entry(&b.category).or_default().push(b);
    }
    let mut out = FrameDetections::empty(frame.key());
    for boxes in by_category.values() {
        out.boxes.extend(merge_category(boxes, cfg));
    }
    out.sort_canonical();
    out
}

/// Runs [`ensemble_frame`] over the union of frames of all inputs.
///
/// Boxes keep their own `detector_id` (boxes without one take their set's
/// `source_id`); the same detector id may not appear in two inputs.
pub fn ensemble_sets(
    sets: &[DetectionSet],
    cfg: &MergeConfig,
    source_id: &str,
) -> Result<DetectionSet> {
    cfg.validate()?;
    let mut owner_of: BTreeMap<String, usize> = BTreeMap::new();
    let mut frames: BTreeMap<FrameKey, Vec<BBox>> = BTreeMap::new();
    for (si, set) in sets.iter().enumerate() {
        let mut tagged = set.clone();
        tagged.tag_boxes();
        let ids: BTreeSet<String> = tagged
            .boxes()
            .filter_map(|(_, b)| b.detector_id.clone())
            .collect();
        for id in ids {
            if let Some(prev) = owner_of.insert(id.clone(), si) {
                if prev != si {
                    return Err(Error::DuplicateDetector(id));
                }
            }
        }
        for (key, frame) in tagged.frames {
            frames.entry(key).or_default().extend(frame.boxes);
        }
    }

    let merged: Vec<FrameDetections> = frames
        .into_par_iter()
        .map(|(key, boxes)| ensemble_frame(&FrameDetections::new(key, boxes), cfg))
        .collect();
    let mut out = DetectionSet::new(source_id);
    for f in merged {
        out.insert_frame(f);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(det: &str, c: [f64; 4], s: f64) -> BBox {
        BBox::new(c[0], c[1], c[2], c[3], s, "vehicle")
            .unwrap()
            .with_detector(det)
    }

    fn frame(boxes: Vec<BBox>) -> FrameDetections {
        FrameDetections::new(FrameKey::new("v", 0), boxes)
    }

    #[test]
    fn identical_boxes_all_neighbors() {
        let bs = [
            bx("a", [0., 0., 10., 10.], 0.9),
            bx("b", [0., 0., 10., 10.], 0.6),
            bx("c", [0., 0., 10., 10.], 0.9),
        ];
        let fb = FrameBoxes::from_boxes(&bs);
        let nm = match_nearest_neighbors(&fb, 0.7);
        for i in 0..3 {
            assert_eq!(nm.neighbors(i).count(), 2);
        }
        let tuples = build_mutual_tuples(&fb, &nm);
        assert_eq!(tuples.len(), 3);
        assert!(tuples.iter().all(|t| t.cardinality() == 3));
    }

    #[test]
    fn disjoint_boxes_have_no_neighbors() {
        let bs = [bx("a", [0., 0., 10., 10.], 0.9), bx("b", [20., 20., 30., 30.], 0.9)];
        let fb = FrameBoxes::from_boxes(&bs);
        let nm = match_nearest_neighbors(&fb, 0.7);
        assert_eq!(nm.neighbors(0).count(), 0);
        assert_eq!(nm.neighbors(1).count(), 0);
    }

    #[test]
    fn nearest_is_argmax_iou() {
        // IOU 100/110 ~ 0.909 vs 100/130 ~ 0.769
        let bs = [
            bx("a", [0., 0., 10., 10.], 0.5),
            bx("b", [0., 0., 10., 13.], 0.9),
            bx("b", [0., 0., 10., 11.], 0.1),
        ];
        let fb = FrameBoxes::from_boxes(&bs);
        let nm = match_nearest_neighbors(&fb, 0.7);
        let j = nm.nearest(0, 1).unwrap();
        assert_eq!(fb.get(j).y2, 11.0);
    }

    #[test]
    fn equal_iou_prefers_higher_score_then_smaller_box() {
        let bs = [
            bx("a", [0., 0., 10., 10.], 0.5),
            bx("b", [1., 0., 11., 10.], 0.4),
            bx("b", [-1., 0., 9., 10.], 0.6),
        ];
        let fb = FrameBoxes::from_boxes(&bs);
        let nm = match_nearest_neighbors(&fb, 0.5);
        assert_eq!(fb.get(nm.nearest(0, 1).unwrap()).score, 0.6);

        let bs = [
            bx("a", [0., 0., 10., 10.], 0.5),
            bx("b", [1., 0., 11., 10.], 0.6),
            bx("b", [-1., 0., 9., 10.], 0.6),
        ];
        let fb = FrameBoxes::from_boxes(&bs);
        let nm = match_nearest_neighbors(&fb, 0.5);
        assert_eq!(fb.get(nm.nearest(0, 1).unwrap()).x1, -1.0);
    }

    #[test]
    fn same_detector_never_matches() {
        let bs = [bx("a", [0., 0., 10., 10.], 0.5), bx("a", [0., 0., 10., 10.], 0.4)];
        let fb = FrameBoxes::from_boxes(&bs);
        let nm = match_nearest_neighbors(&fb, 0.5);
        assert_eq!(nm.neighbors(0).count() + nm.neighbors(1).count(), 0);
    }

    #[test]
    fn anchor_mediated_triplet() {
        // a and c overlap b well, but not each other.
        let bs = [
            bx("a", [0., 0., 10., 10.], 0.5),
            bx("b", [1., 0., 11., 10.], 0.5),
            bx("c", [2., 0., 12., 10.], 0.5),
        ];
        let fb = FrameBoxes::from_boxes(&bs);
        let nm = match_nearest_neighbors(&fb, 0.7);
        assert!(iou(&bs[0], &bs[2]) < 0.7);
        let tuples = build_mutual_tuples(&fb, &nm);
        let b_tuple = tuples.iter().find(|t| t.anchor == 1).unwrap();
        assert_eq!(b_tuple.cardinality(), 3);
        let merged = merge_tuples(&fb, &tuples);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].consensus_n, Some(3));
        assert_eq!(merged[0].x1, 1.0);
    }

    #[test]
    fn isolated_box_is_singleton() {
        let bs = [
            bx("a", [0., 0., 10., 10.], 0.5),
            bx("b", [0., 0., 10., 10.], 0.5),
            bx("c", [4., 4., 14., 14.], 0.5),
        ];
        let fb = FrameBoxes::from_boxes(&bs);
        let tuples = build_mutual_tuples(&fb, &match_nearest_neighbors(&fb, 0.7));
        assert_eq!(tuples[2].cardinality(), 1);
    }

    #[test]
    fn single_detector_only_singletons() {
        let bs = [bx("a", [0., 0., 10., 10.], 0.5), bx("a", [1., 1., 10., 10.], 0.5)];
        let fb = FrameBoxes::from_boxes(&bs);
        let tuples = build_mutual_tuples(&fb, &match_nearest_neighbors(&fb, 0.7));
        assert!(tuples.iter().all(|t| t.cardinality() == 1));
    }

    #[test]
    fn merge_averages_pair() {
        let bs = [bx("a", [0., 0., 10., 10.], 0.9), bx("b", [0., 0., 10., 11.], 0.8)];
        let fb = FrameBoxes::from_boxes(&bs);
        let merged = merge_tuples(&fb, &build_mutual_tuples(&fb, &match_nearest_neighbors(&fb, 0.7)));
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].corners(), [0., 0., 10., 10.5]);
        assert!((merged[0].score - 0.85).abs() < 1e-12);
        assert_eq!(merged[0].consensus_n, Some(2));
    }

    #[test]
    fn merge_singleton_unchanged() {
        let bs = [bx("a", [1., 2., 3., 4.], 0.3)];
        let fb = FrameBoxes::from_boxes(&bs);
        let merged = merge_tuples(&fb, &build_mutual_tuples(&fb, &match_nearest_neighbors(&fb, 0.7)));
        assert_eq!(merged[0].corners(), [1., 2., 3., 4.]);
        assert_eq!(merged[0].score, 0.3);
        assert_eq!(merged[0].consensus_n, Some(1));
    }

    #[test]
    fn merge_triplet_scores() {
        let bs = [
            bx("a", [0., 0., 10., 10.], 0.9),
            bx("b", [0., 0., 10., 10.], 0.6),
            bx("c", [0., 0., 10., 10.], 0.9),
        ];
        let fb = FrameBoxes::from_boxes(&bs);
        let merged = merge_tuples(&fb, &build_mutual_tuples(&fb, &match_nearest_neighbors(&fb, 0.7)));
        assert_eq!(merged.len(), 1);
        assert!((merged[0].score - 0.8).abs() < 1e-12);
        assert_eq!(merged[0].consensus_n, Some(3));
    }

    #[test]
    fn reweight_examples() {
        let cfg = |beta| MergeConfig { beta, ..Default::default() };
        assert!((reweight_confidence(0.81, 3, &cfg(2.0)) - 0.9).abs() < 1e-12);
        assert!((reweight_confidence(0.5, 1, &cfg(3.0)) - 0.125).abs() < 1e-12);
        assert_eq!(reweight_confidence(0.37, 2, &cfg(7.0)), 0.37);
        for n in 1..6 {
            assert_eq!(reweight_confidence(0.37, n, &cfg(1.0)), 0.37);
        }
        assert_eq!(reweight_confidence(0.0, 1, &cfg(3.0)), 0.0);
        assert_eq!(reweight_confidence(1.0, 3, &cfg(3.0)), 1.0);
    }

    #[test]
    fn ensemble_triplet_reweighted() {
        let f = frame(vec![
            bx("a", [0., 0., 10., 10.], 0.9),
            bx("b", [0., 0., 10., 10.], 0.6),
            bx("c", [0., 0., 10., 10.], 0.9),
        ]);
        let out = ensemble_frame(&f, &MergeConfig::default());
        assert_eq!(out.boxes.len(), 1);
        assert!((out.boxes[0].score - 0.8f64.powf(1.0 / 3.0)).abs() < 1e-12);
        assert!((out.boxes[0].score - 0.9283).abs() < 1e-4);
    }

    #[test]
    fn keep_all_single_detector_is_nms() {
        let boxes = vec![
            bx("a", [0., 0., 10., 10.], 0.9),
            bx("a", [0., 0., 10., 9.], 0.8),
            bx("a", [30., 30., 40., 40.], 0.4),
        ];
        let cfg = MergeConfig { policy: MergePolicy::KeepAll, ..Default::default() };
        let out = ensemble_frame(&frame(boxes.clone()), &cfg);
        let expect = nms(boxes, 0.7);
        assert_eq!(out.boxes.len(), expect.len());
        for (o, e) in out.boxes.iter().zip(&expect) {
            assert_eq!(o.corners(), e.corners());
            assert_eq!(o.score, e.score);
        }
    }

    #[test]
    fn drop_singletons_removes_isolated() {
        let f = frame(vec![
            bx("a", [0., 0., 10., 10.], 0.9),
            bx("b", [0., 0., 10., 10.], 0.8),
            bx("c", [0., 0., 10., 10.], 0.7),
            bx("c", [50., 50., 60., 60.], 0.5),
        ]);
        let cfg = MergeConfig { policy: MergePolicy::DropSingletons, ..Default::default() };
        let out = ensemble_frame(&f, &cfg);
        assert_eq!(out.boxes.len(), 1);
        assert_eq!(out.boxes[0].consensus_n, Some(3));
    }

    #[test]
    fn categories_merge_independently() {
        let mut t = bx("b", [0., 0., 10., 10.], 0.8);
        t.category = "truck".into();
        let f = frame(vec![bx("a", [0., 0., 10., 10.], 0.9), t]);
        let cfg = MergeConfig { policy: MergePolicy::KeepAll, ..Default::default() };
        let out = ensemble_frame(&f, &cfg);
        assert_eq!(out.boxes.len(), 2);
        assert!(out.boxes.iter().all(|b| b.consensus_n == Some(1)));
    }

    #[test]
    fn config_validation() {
        assert!(MergeConfig::default().validate().is_ok());
        for bad in [
            MergeConfig { iou_thresh: 0.0, ..Default::default() },
            MergeConfig { iou_thresh: 1.0, ..Default::default() },
            MergeConfig { beta: 0.5, ..Default::default() },
            MergeConfig { n_ref: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
        assert_eq!("keep-all".parse::<MergePolicy>().unwrap(), MergePolicy::KeepAll);
        assert!("vote".parse::<MergePolicy>().is_err());
    }

    #[test]
    fn duplicate_detector_across_sets() {
        let mut a = DetectionSet::new("x");
        a.push(FrameKey::new("v", 0), bx("x", [0., 0., 1., 1.], 0.5));
        let err = ensemble_sets(&[a.clone(), a], &MergeConfig::default(), "ens").unwrap_err();
        assert!(matches!(err, Error::DuplicateDetector(_)));
    }
}
