//! Axis-aligned boxes and their overlap geometry.
//!
//! Corners follow the `(x1, y1)` inclusive / `(x2, y2)` exclusive convention with
//! continuous coordinates, so `area = (x2 - x1) * (y2 - y1)` and IOU is computed
//! without any +1 pixel adjustment.

use std::cmp::Ordering;

use crate::error::{Error, Result};

/// One detection or ground-truth box.
#[derive(Debug, Clone, PartialEq)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
    pub score: f64,
    pub category: String,
    /// Source detector; `None` for ground truth and for merged output.
    pub detector_id: Option<String>,
    pub track_id: Option<String>,
    /// Number of detectors that agreed on this box, set by merging.
    pub consensus_n: Option<u32>,
}

impl BBox {
    /// Builds a validated box with no detector, track or consensus tags.
    pub fn new(
        x1: f64,
        y1: f64,
        x2: f64,
        y2: f64,
        score: f64,
        category: impl Into<String>,
    ) -> Result<Self> {
        let b = BBox {
            x1,
            y1,
            x2,
            y2,
            score,
            category: category.into(),
            detector_id: None,
            track_id: None,
            consensus_n: None,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn with_detector(mut self, detector_id: impl Into<String>) -> Self {
        self.detector_id = Some(detector_id.into());
        self
    }

    pub fn with_track(mut self, track_id: impl Into<String>) -> Self {
        self.track_id = Some(track_id.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        let coords = [self.x1, self.y1, self.x2, self.y2];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "non-finite coordinate in {:?}",
                coords
            )));
        }
        if !(self.x1 < self.x2 && self.y1 < self.y2) {
            return Err(Error::InvalidBox(format!(
                "non-positive area ({}, {}, {}, {})",
                self.x1, self.y1, self.x2, self.y2
            )));
        }
        if !(0.0..=1.0).contains(&self.score) {
            return Err(Error::InvalidBox(format!(
                "score {} outside [0, 1]",
                self.score
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn corners(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// Lexicographic order on `(x1, y1, x2, y2)`.
    pub fn cmp_geometry(&self, other: &BBox) -> Ordering {
        self.x1
            .total_cmp(&other.x1)
            .then(self.y1.total_cmp(&other.y1))
            .then(self.x2.total_cmp(&other.x2))
            .then(self.y2.total_cmp(&other.y2))
    }

    /// Descending score, then lexicographically smaller geometry first, then
    /// category and detector so that the order is total on distinct boxes.
    pub fn cmp_rank(&self, other: &BBox) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then_with(|| self.cmp_geometry(other))
            .then_with(|| self.category.cmp(&other.category))
            .then_with(|| self.detector_id.cmp(&other.detector_id))
            .then_with(|| self.track_id.cmp(&other.track_id))
    }
}

/// Intersection over union of two boxes. Returns 0 for disjoint boxes.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let iw = a.x2.min(b.x2) - a.x1.max(b.x1);
    let ih = a.y2.min(b.y2) - a.y1.max(b.y1);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    // Guard against rounding pushing the ratio past 1 for near-identical boxes.
    (inter / union).min(1.0)
}
