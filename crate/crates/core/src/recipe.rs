//! Declarative synthetic experiments.
//!
//! A recipe (TOML) names a ground-truth source, a list of synthetic detectors,
//! optional merge and fuse steps and a label-budget sweep:
//!
//! ```toml
//! [scene]
//! videos = 2
//! frames_per_video = 100
//! seed = 7
//!
//! [[detectors]]
//! detector_id = "frcnn"
//! coord_jitter_sigma = 2.0
//! score_model = { mean = 0.7, sigma = 0.15 }
//! miss_rate = 0.2
//! fp_rate = 1.0
//! fp_score_model = { mean = 0.35, sigma = 0.15 }
//! seed = 1
//!
//! [merge]
//! beta = 3.0
//!
//! [fuse]
//! with = "labeler"
//!
//! budget_fractions = [0.02, 0.05]
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::detections::{DetectionSet, FrameKey, GroundTruthSet};
use crate::ensemble::{ensemble_sets, MergeConfig};
use crate::error::{Error, Result};
use crate::eval::{coco_map, EvalConfig};
use crate::fusion::{fuse_sets, FuseConfig};
use crate::io::{read_ground_truth, read_meta, CorpusMeta};
use crate::synth::{generate_scene, perturb_ground_truth, sample_label_frames, SceneConfig, SyntheticDetectorSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MergeStep {
    /// Detectors to merge; all detectors when absent.
    #[serde(default)]
    pub detectors: Option<Vec<String>>,
    #[serde(default = "default_iou_merge")]
    pub iou_thresh: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default = "default_n_ref")]
    pub n_ref: u32,
    #[serde(default)]
    pub policy: crate::ensemble::MergePolicy,
}

fn default_iou_merge() -> f64 {
    MergeConfig::default().iou_thresh
}
fn default_beta() -> f64 {
    MergeConfig::default().beta
}
fn default_n_ref() -> u32 {
    MergeConfig::default().n_ref
}
fn default_iou_fuse() -> f64 {
    FuseConfig::default().iou_thresh
}
fn default_downweight() -> f64 {
    FuseConfig::default().unmatched_downweight
}

impl MergeStep {
    pub fn config(&self) -> MergeConfig {
        MergeConfig {
            iou_thresh: self.iou_thresh,
            beta: self.beta,
            n_ref: self.n_ref,
            policy: self.policy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuseStep {
    /// Detector fused with the merged output.
    pub with: String,
    #[serde(default = "default_iou_fuse")]
    pub iou_thresh: f64,
    #[serde(default = "default_downweight")]
    pub unmatched_downweight: f64,
}

impl FuseStep {
    pub fn config(&self) -> FuseConfig {
        FuseConfig {
            iou_thresh: self.iou_thresh,
            unmatched_downweight: self.unmatched_downweight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    /// Generated ground truth; exclusive with `ground_truth`.
    #[serde(default)]
    pub scene: Option<SceneConfig>,
    /// jsonl ground truth, relative to the recipe file.
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
    /// Corpus metadata JSON; required with `ground_truth`.
    #[serde(default)]
    pub meta: Option<PathBuf>,
    pub detectors: Vec<SyntheticDetectorSpec>,
    #[serde(default)]
    pub merge: Option<MergeStep>,
    #[serde(default)]
    pub fuse: Option<FuseStep>,
    #[serde(default)]
    pub budget_fractions: Vec<f64>,
}

impl Recipe {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            location: e
                .span()
                .map_or_else(|| "recipe".to_string(), |s| format!("byte {}", s.start)),
            reason: e.message().to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

/// mAP of every produced detection set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecipeSummary {
    pub detectors: BTreeMap<String, f64>,
    pub ensemble: Option<f64>,
    pub fused: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RecipeOutput {
    pub ground_truth: GroundTruthSet,
    pub meta: CorpusMeta,
    pub detectors: Vec<DetectionSet>,
    pub ensemble: Option<DetectionSet>,
    pub fused: Option<DetectionSet>,
    pub labeled_frames: Vec<(f64, BTreeSet<FrameKey>)>,
    pub summary: RecipeSummary,
}

/// Executes a recipe. Relative paths resolve against `base_dir`.
pub fn run_recipe(recipe: &Recipe, base_dir: &Path) -> Result<RecipeOutput> {
    let (gt, meta) = match (&recipe.scene, &recipe.ground_truth) {
        (Some(scene), None) => generate_scene(scene)?,
        (None, Some(gt_path)) => {
            let meta_path = recipe.meta.as_ref().ok_or_else(|| {
                Error::InvalidConfig("recipe with `ground_truth` also needs `meta`".into())
            })?;
            (
                read_ground_truth(&base_dir.join(gt_path))?,
                read_meta(&base_dir.join(meta_path))?,
            )
        }
        _ => {
            return Err(Error::InvalidConfig(
                "recipe needs exactly one of `scene` or `ground_truth`".into(),
            ))
        }
    };

    let mut seen = BTreeSet::new();
    for d in &recipe.detectors {
        if !seen.insert(d.detector_id.as_str()) {
            return Err(Error::DuplicateDetector(d.detector_id.clone()));
        }
    }
    let detectors = recipe
        .detectors
        .iter()
        .map(|spec| perturb_ground_truth(&gt, spec, &meta))
        .collect::<Result<Vec<_>>>()?;
    let by_id = |id: &str| {
        detectors
            .iter()
            .find(|d| d.source_id == id)
            .ok_or_else(|| Error::InvalidConfig(format!("recipe refers to unknown detector `{id}`")))
    };

    let ensemble = match &recipe.merge {
        Some(step) => {
            let members: Vec<DetectionSet> = match &step.detectors {
                Some(ids) => ids.iter().map(|id| by_id(id).cloned()).collect::<Result<_>>()?,
                None => detectors.clone(),
            };
            Some(ensemble_sets(&members, &step.config(), "ensemble")?)
        }
        None => None,
    };

    let fused = match (&recipe.fuse, &ensemble) {
        (Some(step), Some(ens)) => Some(fuse_sets(ens, by_id(&step.with)?, &step.config(), "fused")?),
        (Some(_), None) => {
            return Err(Error::InvalidConfig("`fuse` requires a `merge` step".into()));
        }
        (None, _) => None,
    };

    let lengths = meta.video_lengths();
    let labeled_frames = recipe
        .budget_fractions
        .iter()
        .map(|&f| Ok((f, sample_label_frames(&lengths, f)?)))
        .collect::<Result<Vec<_>>>()?;

    let cfg = EvalConfig::default();
    let score = |d: &DetectionSet| coco_map(d, &gt, &cfg).map(|r| r.overall_map);
    let summary = RecipeSummary {
        detectors: detectors
            .iter()
            .map(|d| Ok((d.source_id.clone(), score(d)?)))
            .collect::<Result<_>>()?,
        ensemble: ensemble.as_ref().map(score).transpose()?,
        fused: fused.as_ref().map(score).transpose()?,
    };

    Ok(RecipeOutput {
        ground_truth: gt,
        meta,
        detectors,
        ensemble,
        fused,
        labeled_frames,
        summary,
    })
}
