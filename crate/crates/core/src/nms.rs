use std::collections::BTreeMap;

use crate::bbox::{iou, BBox};

/// Greedy non-maximal suppression over boxes of a single category.
///
/// Keeps the highest-scoring remaining box and discards every remaining box
/// whose IOU with it is at least `iou_thresh`. Equal scores keep the
/// lexicographically smaller box. Output is in descending score order.
pub fn nms(mut boxes: Vec<BBox>, iou_thresh: f64) -> Vec<BBox> {
    boxes.sort_by(BBox::cmp_rank);
    let mut kept: Vec<BBox> = Vec::with_capacity(boxes.len());
    for b in boxes {
        if kept.iter().all(|k| iou(k, &b) < iou_thresh) {
            kept.push(b);
        }
    }
    kept
}

/// [`nms`] applied to each category independently; output in canonical order.
pub fn nms_per_category(boxes: Vec<BBox>, iou_thresh: f64) -> Vec<BBox> {
    let mut groups: BTreeMap<String, Vec<BBox>> = BTreeMap::new();
    for b in boxes {
        groups.entry(b.category.clone()).or_default().push(b);
    }
    let mut out: Vec<BBox> = groups
        .into_values()
        .flat_map(|g| nms(g, iou_thresh))
        .collect();
    out.sort_by(BBox::cmp_rank);
    out
}
