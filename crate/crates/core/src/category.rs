//! Collapsing fine-grained categories into evaluation superclasses.

use std::collections::BTreeMap;

use crate::detections::{DetectionSet, GroundTruthSet};
use crate::error::{Error, Result};

/// Superclass name that removes a category instead of renaming it.
pub const DROP: &str = "DROP";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CategoryMap {
    mapping: BTreeMap<String, String>,
}

impl CategoryMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, category: impl Into<String>, superclass: impl Into<String>) {
        self.mapping.insert(category.into(), superclass.into());
    }

    /// `None` when the category should be dropped.
    pub fn lookup(&self, category: &str) -> Result<Option<&str>> {
        match self.mapping.get(category) {
            Some(s) if s == DROP => Ok(None),
            Some(s) => Ok(Some(s)),
            None => Err(Error::UnmappedCategory(category.to_string())),
        }
    }

    /// Parses the two-column text form: `category superclass` per line,
    /// whitespace separated, `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = CategoryMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut cols = line.split_whitespace();
            let (Some(cat), Some(sup), None) = (cols.next(), cols.next(), cols.next()) else {
                return Err(Error::Parse {
                    location: format!("line {}", i + 1),
                    reason: format!("expected two columns, got `{line}`"),
                });
            };
            if map.mapping.contains_key(cat) {
                return Err(Error::Parse {
                    location: format!("line {}", i + 1),
                    reason: format!("category `{cat}` mapped twice"),
                });
            }
            map.insert(cat, sup);
        }
        Ok(map)
    }
}

/// Replaces every box category by its superclass and removes dropped ones.
/// Frames emptied by dropping are kept as empty frames.
pub fn map_to_superclass(dets: &DetectionSet, cmap: &CategoryMap) -> Result<DetectionSet> {
    let mut out = dets.clone();
    for frame in out.frames.values_mut() {
        let mut kept = Vec::with_capacity(frame.boxes.len());
        for mut b in frame.boxes.drain(..) {
            if let Some(sup) = cmap.lookup(&b.category)? {
                b.category = sup.to_string();
                kept.push(b);
            }
        }
        frame.boxes = kept;
    }
    Ok(out)
}

pub fn map_ground_truth(gt: &GroundTruthSet, cmap: &CategoryMap) -> Result<GroundTruthSet> {
    let mut out = gt.clone();
    for boxes in out.frames.values_mut() {
        let mut kept = Vec::with_capacity(boxes.len());
        for mut b in boxes.drain(..) {
            if let Some(sup) = cmap.lookup(&b.category)? {
                b.category = sup.to_string();
                kept.push(b);
            }
        }
        *boxes = kept;
    }
    Ok(out)
}
