//! Consensus merging of bounding boxes from several object detectors,
//! fusion of two complementary detection sources, and COCO-style
//! mAP@0.5:0.95 evaluation, with a synthetic benchmark generator for
//! reproducible desk-scale experiments.

pub mod bbox;
pub mod category;
pub mod detections;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod fusion;
pub mod io;
pub mod nms;
pub mod recipe;
pub mod synth;

pub use bbox::{iou, BBox};
pub use category::{map_to_superclass, CategoryMap};
pub use detections::{DetectionSet, FrameDetections, FrameKey, GroundTruthSet};
pub use ensemble::{ensemble_frame, ensemble_sets, reweight_confidence, MergeConfig, MergePolicy};
pub use error::{Error, Result};
pub use eval::{average_precision, coco_map, EvalConfig, EvalReport};
pub use fusion::{fuse_pair, fuse_sets, override_with_ground_truth, FuseConfig};
pub use nms::nms;
pub use synth::{median_object_duration, perturb_ground_truth, sample_label_frames};
