//! Random frame generators for property and oracle tests.

#![allow(dead_code)]

use detfuse::BBox;
use rand::Rng;

pub const SCORES: [f64; 6] = [0.3, 0.5, 0.6, 0.8, 0.9, 0.95];

/// A frame of at most `max_boxes` boxes spread over `detectors`, built as
/// perturbed copies of 1-3 underlying objects so that overlaps straddle
/// typical thresholds. Coordinates sit on a half-pixel grid and scores come
/// from a small set, so IOU and score ties happen regularly. No detector
/// holds two boxes with identical geometry.
pub fn random_frame(rng: &mut impl Rng, max_boxes: usize, detectors: &[&str]) -> Vec<BBox> {
    let objects: Vec<[f64; 4]> = (0..rng.random_range(1..=3))
        .map(|_| {
            let x = rng.random_range(0..8) as f64 * 5.0;
            let y = rng.random_range(0..4) as f64 * 5.0;
            let w = rng.random_range(8..=16) as f64;
            let h = rng.random_range(8..=16) as f64;
            [x, y, x + w, y + h]
        })
        .collect();
    let count = rng.random_range(1..=max_boxes);
    let mut out: Vec<BBox> = Vec::new();
    let mut attempts = 0;
    while out.len() < count && attempts < 100 {
        attempts += 1;
        let o = objects[rng.random_range(0..objects.len())];
        let mut c = o;
        for v in &mut c {
            *v += rng.random_range(-3..=3) as f64 * 0.5;
        }
        if c[0] >= c[2] || c[1] >= c[3] {
            continue;
        }
        let det = detectors[rng.random_range(0..detectors.len())];
        if out
            .iter()
            .any(|b| b.detector_id.as_deref() == Some(det) && b.corners() == c)
        {
            continue;
        }
        let score = SCORES[rng.random_range(0..SCORES.len())];
        out.push(
            BBox::new(c[0], c[1], c[2], c[3], score, "vehicle")
                .unwrap()
                .with_detector(det),
        );
    }
    out
}

/// Arbitrary valid box with continuous coordinates.
pub fn random_box(rng: &mut impl Rng, extent: f64) -> BBox {
    let x1 = rng.random_range(0.0..extent);
    let y1 = rng.random_range(0.0..extent);
    let w = rng.random_range(0.5..extent / 2.0);
    let h = rng.random_range(0.5..extent / 2.0);
    BBox::new(x1, y1, x1 + w, y1 + h, rng.random_range(0.0..=1.0), "vehicle").unwrap()
}
