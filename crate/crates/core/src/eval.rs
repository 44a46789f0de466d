//! COCO-style mAP@0.5:0.95 evaluation.
//!
//! Detections are matched to ground truth per frame and category, pooled over
//! the whole corpus, ranked globally by score and turned into a 101-point
//! interpolated average precision for each IOU threshold. Categories (and
//! videos, for the per-video breakdown) without ground truth are left out of
//! the averages.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bbox::{iou, BBox};
use crate::detections::{DetectionSet, FrameKey, GroundTruthSet};
use crate::error::{Error, Result};

/// The ten COCO thresholds `0.50, 0.55, ..., 0.95`, each built as
/// `(50 + 5 i) / 100` so that every value is the correctly rounded decimal.
pub fn coco_iou_thresholds() -> Vec<f64> {
    (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub recall_points: usize,
    pub max_dets_per_frame: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_thresholds: coco_iou_thresholds(),
            recall_points: 101,
            max_dets_per_frame: 100,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iou_thresholds.is_empty() {
            return Err(Error::InvalidConfig("no IOU thresholds".into()));
        }
        if self.iou_thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::InvalidConfig("IOU thresholds must lie in (0, 1)".into()));
        }
        if self.iou_thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("IOU thresholds must be strictly increasing".into()));
        }
        if self.recall_points < 2 {
            return Err(Error::InvalidConfig("recall_points must be at least 2".into()));
        }
        if self.max_dets_per_frame == 0 {
            return Err(Error::InvalidConfig("max_dets_per_frame must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAp {
    pub iou_threshold: f64,
    pub ap: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchCounts {
    pub iou_threshold_percent: u32,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_map: f64,
    pub ap_per_threshold: Vec<ThresholdAp>,
    /// Videos without ground truth are absent.
    pub map_per_video: BTreeMap<String, f64>,
    pub counts: MatchCounts,
    pub num_gt: u64,
    pub num_dets: u64,
}

impl EvalReport {
    /// Plain-text table for terminals.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<14} {:>8}", "IOU", "AP");
        for t in &self.ap_per_threshold {
            let _ = writeln!(s, "{:<14.2} {:>8.4}", t.iou_threshold, t.ap);
        }
        let _ = writeln!(s, "{:<14} {:>8.4}", "mAP@.5:.95", self.overall_map);
        if !self.map_per_video.is_empty() {
            let _ = writeln!(s);
            let _ = writeln!(s, "{:<24} {:>8}", "video", "mAP");
            for (v, m) in &self.map_per_video {
                let _ = writeln!(s, "{:<24} {:>8.4}", v, m);
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "at IOU {:.2}: TP {}  FP {}  FN {}   (gt {}, dets {})",
            self.counts.iou_threshold_percent as f64 / 100.0,
            self.counts.tp,
            self.counts.fp,
            self.counts.fn_,
            self.num_gt,
            self.num_dets
        );
        s
    }
}

fn cmp_gt(a: &BBox, b: &BBox) -> std::cmp::Ordering {
    a.cmp_geometry(b).then_with(|| a.track_id.cmp(&b.track_id))
}

/// Greedy matching in one frame and category.
///
/// Detections are visited in descending score (ties: smaller geometry first);
/// each takes the still-unmatched ground-truth box of highest IOU if that IOU
/// is at least `iou_t`. Returned flags are aligned with `dets` as given.
pub fn match_detections_to_gt(dets: &[BBox], gt: &[BBox], iou_t: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[a].cmp_rank(&dets[b]));
    let mut gt_sorted: Vec<&BBox> = gt.iter().collect();
    gt_sorted.sort_by(|a, b| cmp_gt(a, b));
    let overlaps: Vec<Vec<f64>> = order
        .iter()
        .map(|&d| gt_sorted.iter().map(|g| iou(&dets[d], g)).collect())
        .collect();

    let mut flags = vec![false; dets.len()];
    for (&d, tp) in order.iter().zip(greedy_match(&overlaps, iou_t)) {
        flags[d] = tp;
    }
    flags
}

/// `overlaps[d][g]` with rows in rank order and columns in gt order. Ties in
/// IOU go to the earlier gt column.
fn greedy_match(overlaps: &[Vec<f64>], iou_t: f64) -> Vec<bool> {
    let num_gt = overlaps.first().map_or(0, Vec::len);
    let mut taken = vec![false; num_gt];
    overlaps
        .iter()
        .map(|row| {
            let mut best: Option<(usize, f64)> = None;
            for (g, &v) in row.iter().enumerate() {
                if !taken[g] && v >= iou_t && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((g, v));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            best.is_some()
        })
        .collect()
}

/// Interpolated average precision of a ranked TP/FP list.
///
/// `flags` must be in descending score order. Precision is made monotone
/// (each point takes the maximum precision at any higher recall) and sampled
/// at `recall_points` evenly spaced recall levels in `[0, 1]`; levels beyond
/// the maximum recall count as 0. With `num_gt == 0` the result is 0 if any
/// detection exists and 1 otherwise.
pub fn average_precision(flags: &[bool], num_gt: usize, recall_points: usize) -> f64 {
    if num_gt == 0 {
        return if flags.is_empty() { 1.0 } else { 0.0 };
    }
    let mut tp = 0usize;
    let mut recall = Vec::with_capacity(flags.len());
    let mut precision = Vec::with_capacity(flags.len());
    for (k, &is_tp) in flags.iter().enumerate() {
        if is_tp {
            tp += 1;
        }
        recall.push(tp as f64 / num_gt as f64);
        precision.push(tp as f64 / (k + 1) as f64);
    }
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let last = (recall_points - 1) as f64;
    let total: f64 = (0..recall_points)
        .map(|j| {
            let r = j as f64 / last;
            let idx = recall.partition_point(|&x| x < r);
            precision.get(idx).copied().unwrap_or(0.0)
        })
        .sum();
    total / recall_points as f64
}

/// One detection after per-frame matching, with its TP flag per threshold.
struct Scored<'a> {
    key: &'a FrameKey,
    det: &'a BBox,
    tp: Vec<bool>,
}

fn cmp_scored(a: &Scored<'_>, b: &Scored<'_>) -> std::cmp::Ordering {
    b.det
        .score
        .total_cmp(&a.det.score)
        .then_with(|| a.key.cmp(b.key))
        .then_with(|| a.det.cmp_geometry(b.det))
        .then_with(|| a.det.category.cmp(&b.det.category))
        .then_with(|| a.det.detector_id.cmp(&b.det.detector_id))
}

fn match_frame<'a>(
    key: &'a FrameKey,
    dets: &[&'a BBox],
    gt: &[&'a BBox],
    thresholds: &[f64],
    max_dets: usize,
) -> Vec<Scored<'a>> {
    let mut dets = dets.to_vec();
    dets.sort_by(|a, b| a.cmp_rank(b));
    dets.truncate(max_dets);
    let mut gt = gt.to_vec();
    gt.sort_by(|a, b| cmp_gt(a, b));

    let overlaps: Vec<Vec<f64>> = dets
        .iter()
        .map(|d| gt.iter().map(|g| iou(d, g)).collect())
        .collect();

    let mut scored: Vec<Scored<'a>> = dets
        .iter()
        .map(|d| Scored {
            key,
            det: d,
            tp: Vec::with_capacity(thresholds.len()),
        })
        .collect();
    for &t in thresholds {
        for (s, tp) in scored.iter_mut().zip(greedy_match(&overlaps, t)) {
            s.tp.push(tp);
        }
    }
    scored
}

/// Per-threshold AP averaged over categories that have ground truth.
fn ap_by_threshold<'a>(
    ranked: impl Iterator<Item = &'a Scored<'a>> + Clone,
    num_gt: &BTreeMap<&str, usize>,
    cfg: &EvalConfig,
) -> Vec<f64> {
    let categories: Vec<(&str, usize)> = num_gt
        .iter()
        .filter(|(_, &n)| n > 0)
        .map(|(c, &n)| (*c, n))
        .collect();
    (0..cfg.iou_thresholds.len())
        .map(|ti| {
            let sum: f64 = categories
                .iter()
                .map(|&(c, n)| {
                    let flags: Vec<bool> = ranked
                        .clone()
                        .filter(|s| s.det.category == c)
                        .map(|s| s.tp[ti])
                        .collect();
                    average_precision(&flags, n, cfg.recall_points)
                })
                .sum();
            sum / categories.len() as f64
        })
        .collect()
}

/// Evaluates a detection set against ground truth.
pub fn coco_map(dets: &DetectionSet, gt: &GroundTruthSet, cfg: &EvalConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let total_gt = gt.num_boxes();
    if total_gt == 0 {
        return Err(Error::EmptyGroundTruth);
    }

    let keys: BTreeSet<&FrameKey> = dets.frames.keys().chain(gt.frames.keys()).collect();
    let mut scored: Vec<Scored<'_>> = Vec::new();
    // (video, category) -> gt count
    let mut gt_counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for key in keys {
        let mut by_cat: BTreeMap<&str, (Vec<&BBox>, Vec<&BBox>)> = BTreeMap::new();
        if let Some(f) = dets.frames.get(key) {
            for b in &f.boxes {
                by_cat.entry(&b.category).or_default().0.push(b);
            }
        }
        if let Some(g) = gt.frames.get(key) {
            for b in g {
                by_cat.entry(&b.category).or_default().1.push(b);
            }
        }
        for (cat, (d, g)) in by_cat {
            *gt_counts.entry((&key.video_id, cat)).or_default() += g.len();
            scored.extend(match_frame(key, &d, &g, &cfg.iou_thresholds, cfg.max_dets_per_frame));
        }
    }
    scored.sort_by(cmp_scored);

    let mut num_gt: BTreeMap<&str, usize> = BTreeMap::new();
    for (&(_, cat), &n) in &gt_counts {
        *num_gt.entry(cat).or_default() += n;
    }
    let aps = ap_by_threshold(scored.iter(), &num_gt, cfg);
    let overall_map = aps.iter().sum::<f64>() / aps.len() as f64;

    let videos: BTreeSet<&str> = gt_counts.keys().map(|(v, _)| *v).collect();
    let mut map_per_video = BTreeMap::new();
    for v in videos {
        let mut video_gt: BTreeMap<&str, usize> = BTreeMap::new();
        for (&(vid, cat), &n) in &gt_counts {
            if vid == v {
                *video_gt.entry(cat).or_default() += n;
            }
        }
        if video_gt.values().all(|&n| n == 0) {
            continue;
        }
        let ranked = scored.iter().filter(move |s| s.key.video_id == v);
        let video_aps = ap_by_threshold(ranked, &video_gt, cfg);
        map_per_video.insert(
            v.to_string(),
            video_aps.iter().sum::<f64>() / video_aps.len() as f64,
        );
    }

    let ci = cfg
        .iou_thresholds
        .iter()
        .position(|&t| (t - 0.5).abs() < 1e-12)
        .unwrap_or(0);
    let tp = scored.iter().filter(|s| s.tp[ci]).count() as u64;
    let counts = MatchCounts {
        iou_threshold_percent: (cfg.iou_thresholds[ci] * 100.0).round() as u32,
        tp,
        fp: scored.len() as u64 - tp,
        fn_: total_gt as u64 - tp,
    };

    Ok(EvalReport {
        overall_map,
        ap_per_threshold: cfg
            .iou_thresholds
            .iter()
            .zip(&aps)
            .map(|(&iou_threshold, &ap)| ThresholdAp { iou_threshold, ap })
            .collect(),
        map_per_video,
        counts,
        num_gt: total_gt as u64,
        num_dets: scored.len() as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(c: [f64; 4], s: f64) -> BBox {
        BBox::new(c[0], c[1], c[2], c[3], s, "vehicle").unwrap()
    }

    #[test]
    fn thresholds_are_exact_decimals() {
        let t = coco_iou_thresholds();
        assert_eq!(t.len(), 10);
        assert_eq!(t[0], 0.5);
        assert_eq!(t[6], 0.8);
        assert_eq!(t[9], 0.95);
    }

    #[test]
    fn perfect_match() {
        let g = [bx([0., 0., 10., 10.], 1.0)];
        assert_eq!(match_detections_to_gt(&[bx([0., 0., 10., 10.], 0.3)], &g, 0.5), vec![true]);
    }

    #[test]
    fn one_gt_two_dets() {
        let g = [bx([0., 0., 10., 10.], 1.0)];
        let d = [bx([0., 0., 10., 9.], 0.4), bx([0., 0., 10., 10.], 0.7)];
        assert_eq!(match_detections_to_gt(&d, &g, 0.5), vec![false, true]);
    }

    #[test]
    fn below_threshold_is_fp() {
        let g = [bx([0., 0., 10., 10.], 1.0)];
        // IOU 0.4
        let d = [bx([0., 0., 10., 4.], 0.9)];
        assert!((iou(&d[0], &g[0]) - 0.4).abs() < 1e-12);
        assert_eq!(match_detections_to_gt(&d, &g, 0.5), vec![false]);
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[true], 1, 101), 1.0);
        assert_eq!(average_precision(&[false], 1, 101), 0.0);
        let ap = average_precision(&[true, false, true], 2, 101);
        assert!((ap - (51.0 + 50.0 * 2.0 / 3.0) / 101.0).abs() < 1e-12);
        assert!((ap - 0.8350).abs() < 1e-4);
        assert_eq!(average_precision(&[], 0, 101), 1.0);
        assert_eq!(average_precision(&[false], 0, 101), 0.0);
        assert_eq!(average_precision(&[], 3, 101), 0.0);
    }

    fn gt_of(boxes: &[[f64; 4]]) -> GroundTruthSet {
        let mut gt = GroundTruthSet::new();
        gt.insert_frame(
            FrameKey::new("v", 0),
            boxes.iter().map(|c| bx(*c, 1.0)).collect(),
        )
        .unwrap();
        gt
    }

    #[test]
    fn self_evaluation_is_perfect() {
        let gt = gt_of(&[[0., 0., 10., 10.], [20., 20., 40., 30.]]);
        let r = coco_map(&gt.to_detections("gt"), &gt, &EvalConfig::default()).unwrap();
        assert_eq!(r.overall_map, 1.0);
        assert_eq!(r.counts, MatchCounts { iou_threshold_percent: 50, tp: 2, fp: 0, fn_: 0 });
        assert_eq!(r.map_per_video["v"], 1.0);
    }

    #[test]
    fn iou_point_eight_passes_seven_thresholds() {
        let gt = gt_of(&[[0., 0., 10., 10.]]);
        let mut d = DetectionSet::new("d");
        d.push(FrameKey::new("v", 0), bx([0., 0., 10., 8.], 0.9));
        let r = coco_map(&d, &gt, &EvalConfig::default()).unwrap();
        assert_eq!(r.overall_map, 0.7);
        let passed = r.ap_per_threshold.iter().filter(|t| t.ap == 1.0).count();
        assert_eq!(passed, 7);
    }

    #[test]
    fn empty_detections_score_zero() {
        let gt = gt_of(&[[0., 0., 10., 10.]]);
        let r = coco_map(&DetectionSet::new("d"), &gt, &EvalConfig::default()).unwrap();
        assert_eq!(r.overall_map, 0.0);
        assert_eq!(r.counts.fn_, 1);
    }

    #[test]
    fn empty_ground_truth_errors() {
        let r = coco_map(&DetectionSet::new("d"), &GroundTruthSet::new(), &EvalConfig::default());
        assert!(matches!(r, Err(Error::EmptyGroundTruth)));
    }

    #[test]
    fn detections_on_unlabeled_frames_are_fps() {
        let gt = gt_of(&[[0., 0., 10., 10.]]);
        let mut d = DetectionSet::new("d");
        d.push(FrameKey::new("v", 0), bx([0., 0., 10., 10.], 0.5));
        d.push(FrameKey::new("w", 7), bx([0., 0., 10., 10.], 0.9));
        let r = coco_map(&d, &gt, &EvalConfig::default()).unwrap();
        assert_eq!(r.counts.fp, 1);
        // [FP, TP] over one gt: precision 1/2 at full recall.
        assert!((r.overall_map - 0.5).abs() < 1e-12);
        assert!(!r.map_per_video.contains_key("w"));
        assert_eq!(r.map_per_video["v"], 1.0);
    }

    #[test]
    fn max_dets_caps_per_frame() {
        let gt = gt_of(&[[0., 0., 10., 10.]]);
        let mut d = DetectionSet::new("d");
        d.push(FrameKey::new("v", 0), bx([50., 0., 60., 10.], 0.9));
        d.push(FrameKey::new("v", 0), bx([0., 0., 10., 10.], 0.5));
        let cfg = EvalConfig { max_dets_per_frame: 1, ..Default::default() };
        let r = coco_map(&d, &gt, &cfg).unwrap();
        assert_eq!(r.num_dets, 1);
        assert_eq!(r.overall_map, 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(EvalConfig::default().validate().is_ok());
        assert!(EvalConfig { recall_points: 1, ..Default::default() }.validate().is_err());
        assert!(EvalConfig { iou_thresholds: vec![0.5, 0.5], ..Default::default() }
            .validate()
            .is_err());
        assert!(EvalConfig { iou_thresholds: vec![0.0], ..Default::default() }
            .validate()
            .is_err());
    }
}
