//! Synthetic noisy detectors, label-budget sampling and corpus statistics.
//!
//! Every random draw comes from a ChaCha stream keyed by
//! `(seed, detector_id, video_id, frame_id)`, so generated frames do not depend
//! on iteration order or on how the work is split across threads.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bbox::BBox;
use crate::detections::{DetectionSet, FrameDetections, FrameKey, GroundTruthSet};
use crate::error::{Error, Result};
use crate::io::{CorpusMeta, VideoMeta};

/// Smallest side length a jittered box may collapse to.
const MIN_SIDE: f64 = 1e-3;
/// Sampled scores are kept inside the open unit interval.
const SCORE_EPS: f64 = 1e-6;
const FP_MIN_SIDE: f64 = 4.0;

/// Gaussian `(mean, sigma)` score model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreModel {
    pub mean: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseProfile {
    /// Per-corner Gaussian jitter in pixels.
    pub coord_jitter_sigma: f64,
    pub score_model: ScoreModel,
    pub miss_rate: f64,
    /// Expected false positives per frame (Poisson mean).
    pub fp_rate: f64,
    pub fp_score_model: ScoreModel,
    #[serde(default = "default_fp_category")]
    pub fp_category: String,
    pub seed: u64,
}

fn default_fp_category() -> String {
    "vehicle".to_string()
}

impl NoiseProfile {
    /// No misses, no false positives, no jitter, scores pinned at `score`.
    pub fn noiseless(score: f64, seed: u64) -> Self {
        NoiseProfile {
            coord_jitter_sigma: 0.0,
            score_model: ScoreModel { mean: score, sigma: 0.0 },
            miss_rate: 0.0,
            fp_rate: 0.0,
            fp_score_model: ScoreModel { mean: 0.5, sigma: 0.0 },
            fp_category: default_fp_category(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProfile(msg));
        if !(0.0..=1.0).contains(&self.miss_rate) {
            return bad(format!("miss_rate {} outside [0, 1]", self.miss_rate));
        }
        if !(self.fp_rate >= 0.0 && self.fp_rate.is_finite()) {
            return bad(format!("fp_rate {} must be finite and non-negative", self.fp_rate));
        }
        if !(self.coord_jitter_sigma >= 0.0 && self.coord_jitter_sigma.is_finite()) {
            return bad(format!("coord_jitter_sigma {} must be non-negative", self.coord_jitter_sigma));
        }
        for (name, m) in [("score_model", self.score_model), ("fp_score_model", self.fp_score_model)] {
            if !(m.sigma >= 0.0 && m.sigma.is_finite() && m.mean.is_finite()) {
                return bad(format!("{name} needs a finite mean and non-negative sigma"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDetectorSpec {
    pub detector_id: String,
    #[serde(flatten)]
    pub profile: NoiseProfile,
}

/// Independent RNG stream for one `(detector, video, frame)` cell.
pub fn frame_rng(seed: u64, stream: &str, video_id: &str, frame_id: u64) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update((stream.len() as u64).to_le_bytes());
    h.update(stream.as_bytes());
    h.update((video_id.len() as u64).to_le_bytes());
    h.update(video_id.as_bytes());
    h.update(frame_id.to_le_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}

fn sample_score(rng: &mut ChaCha8Rng, m: ScoreModel) -> f64 {
    let s = if m.sigma > 0.0 {
        Normal::new(m.mean, m.sigma).expect("validated sigma").sample(rng)
    } else {
        m.mean
    };
    s.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
}

fn jitter(rng: &mut ChaCha8Rng, b: &BBox, sigma: f64) -> [f64; 4] {
    let mut c = b.corners();
    if sigma > 0.0 {
        let n = Normal::new(0.0, sigma).expect("validated sigma");
        for v in &mut c {
            *v += n.sample(rng);
        }
    }
    let (mut x1, mut x2) = (c[0].min(c[2]), c[0].max(c[2]));
    let (mut y1, mut y2) = (c[1].min(c[3]), c[1].max(c[3]));
    if x2 - x1 < MIN_SIDE {
        let cx = 0.5 * (x1 + x2);
        (x1, x2) = (cx - 0.5 * MIN_SIDE, cx + 0.5 * MIN_SIDE);
    }
    if y2 - y1 < MIN_SIDE {
        let cy = 0.5 * (y1 + y2);
        (y1, y2) = (cy - 0.5 * MIN_SIDE, cy + 0.5 * MIN_SIDE);
    }
    [x1, y1, x2, y2]
}

/// Side length drawn log-uniformly in `[4, extent / 2]`.
fn fp_side(rng: &mut ChaCha8Rng, extent: f64) -> f64 {
    let hi = (0.5 * extent).max(FP_MIN_SIDE);
    let (lo, hi) = (FP_MIN_SIDE.ln(), hi.ln());
    let side = if hi > lo { rng.random_range(lo..hi).exp() } else { FP_MIN_SIDE };
    side.min(extent)
}

fn perturb_frame(
    key: &FrameKey,
    gt: &[BBox],
    video: &VideoMeta,
    spec: &SyntheticDetectorSpec,
) -> FrameDetections {
    let p = &spec.profile;
    let mut rng = frame_rng(p.seed, &spec.detector_id, &key.video_id, key.frame_id);
    let mut sorted: Vec<&BBox> = gt.iter().collect();
    sorted.sort_by(|a, b| a.cmp_geometry(b).then_with(|| a.track_id.cmp(&b.track_id)));

    let mut boxes = Vec::new();
    for g in sorted {
        if rng.random::<f64>() < p.miss_rate {
            continue;
        }
        let [x1, y1, x2, y2] = jitter(&mut rng, g, p.coord_jitter_sigma);
        boxes.push(BBox {
            x1,
            y1,
            x2,
            y2,
            score: sample_score(&mut rng, p.score_model),
            category: g.category.clone(),
            detector_id: Some(spec.detector_id.clone()),
            track_id: None,
            consensus_n: None,
        });
    }

    let num_fp = if p.fp_rate > 0.0 {
        Poisson::new(p.fp_rate).expect("validated rate").sample(&mut rng) as usize
    } else {
        0
    };
    for _ in 0..num_fp {
        let w = fp_side(&mut rng, video.width);
        let h = fp_side(&mut rng, video.height);
        let x1 = rng.random::<f64>() * (video.width - w);
        let y1 = rng.random::<f64>() * (video.height - h);
        boxes.push(BBox {
            x1,
            y1,
            x2: x1 + w,
            y2: y1 + h,
            score: sample_score(&mut rng, p.fp_score_model),
            category: p.fp_category.clone(),
            detector_id: Some(spec.detector_id.clone()),
            track_id: None,
            consensus_n: None,
        });
    }
    let mut frame = FrameDetections::new(key.clone(), boxes);
    frame.sort_canonical();
    frame
}

/// Simulates a detector by perturbing ground truth.
///
/// Every frame listed in `meta` is generated (frames without ground truth
/// can still receive false positives). Each ground-truth box is dropped with
/// probability `miss_rate`; survivors get per-corner Gaussian jitter and a
/// sampled score. A Poisson number of false positives is placed uniformly in
/// the frame, with sides log-uniform between 4 px and half the frame extent.
pub fn perturb_ground_truth(
    gt: &GroundTruthSet,
    spec: &SyntheticDetectorSpec,
    meta: &CorpusMeta,
) -> Result<DetectionSet> {
    spec.profile.validate()?;
    meta.validate()?;
    for key in gt.frames.keys() {
        match meta.videos.get(&key.video_id) {
            Some(v) if key.frame_id < v.frames => {}
            _ => {
                return Err(Error::InvalidConfig(format!(
                    "ground-truth frame {key} lies outside the corpus metadata"
                )))
            }
        }
    }
    let keys: Vec<(FrameKey, &VideoMeta)> = meta
        .videos
        .iter()
        .flat_map(|(vid, v)| (0..v.frames).map(move |f| (FrameKey::new(vid.clone(), f), v)))
        .collect();
    let empty = Vec::new();
    let frames: Vec<FrameDetections> = keys
        .par_iter()
        .map(|(key, video)| perturb_frame(key, gt.frames.get(key).unwrap_or(&empty), video, spec))
        .collect();
    let mut out = DetectionSet::new(spec.detector_id.clone());
    for f in frames {
        out.insert_frame(f);
    }
    Ok(out)
}

/// Uniformly spaced labeled frames: per video of `N` frames,
/// `B = max(1, round(fraction * N))` frames at indices `floor(k * N / B)`.
pub fn sample_label_frames(
    video_lengths: &BTreeMap<String, u64>,
    budget_fraction: f64,
) -> Result<BTreeSet<FrameKey>> {
    if !(budget_fraction > 0.0 && budget_fraction <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "budget fraction {budget_fraction} outside (0, 1]"
        )));
    }
    let mut out = BTreeSet::new();
    for (vid, &n) in video_lengths {
        if n == 0 {
            return Err(Error::InvalidConfig(format!("video `{vid}` has no frames")));
        }
        let b = ((budget_fraction * n as f64).round() as u64).clamp(1, n);
        for k in 0..b {
            out.insert(FrameKey::new(vid.clone(), k * n / b));
        }
    }
    Ok(out)
}

/// Median track length in frames, where a track spans from its first to
/// its last appearance (inclusive) within one video.
pub fn median_object_duration(gt: &GroundTruthSet) -> Result<f64> {
    let mut spans: BTreeMap<(&str, &str), (u64, u64)> = BTreeMap::new();
    for (key, boxes) in &gt.frames {
        for b in boxes {
            let Some(t) = &b.track_id else { continue };
            spans
                .entry((&key.video_id, t))
                .and_modify(|(lo, hi)| {
                    *lo = (*lo).min(key.frame_id);
                    *hi = (*hi).max(key.frame_id);
                })
                .or_insert((key.frame_id, key.frame_id));
        }
    }
    if spans.is_empty() {
        return Err(Error::NoTracks);
    }
    let mut durations: Vec<u64> = spans.values().map(|(lo, hi)| hi - lo + 1).collect();
    durations.sort_unstable();
    let m = durations.len();
    Ok(if m % 2 == 1 {
        durations[m / 2] as f64
    } else {
        (durations[m / 2 - 1] + durations[m / 2]) as f64 / 2.0
    })
}

/// Parameters for a synthetic ground-truth corpus of moving boxes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneConfig {
    pub videos: usize,
    pub frames_per_video: u64,
    pub width: f64,
    pub height: f64,
    /// Mean number of objects visible in a frame.
    pub objects_per_frame: f64,
    /// Mean track length in frames.
    pub mean_track_duration: f64,
    pub min_size: f64,
    pub max_size: f64,
    pub category: String,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            videos: 2,
            frames_per_video: 100,
            width: 1242.0,
            height: 375.0,
            objects_per_frame: 3.0,
            mean_track_duration: 30.0,
            min_size: 40.0,
            max_size: 120.0,
            category: "vehicle".into(),
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.videos > 0
            && self.frames_per_video > 0
            && self.width > self.max_size
            && self.height > self.max_size
            && self.objects_per_frame > 0.0
            && self.mean_track_duration >= 1.0
            && self.min_size > 0.0
            && self.min_size <= self.max_size;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("inconsistent scene config {self:?}")))
        }
    }

    pub fn meta(&self) -> CorpusMeta {
        CorpusMeta {
            videos: (0..self.videos)
                .map(|v| {
                    (
                        video_name(v),
                        VideoMeta {
                            frames: self.frames_per_video,
                            width: self.width,
                            height: self.height,
                        },
                    )
                })
                .collect(),
        }
    }
}

fn video_name(v: usize) -> String {
    format!("video{v:03}")
}

/// Generates tracked boxes drifting linearly across each video.
pub fn generate_scene(cfg: &SceneConfig) -> Result<(GroundTruthSet, CorpusMeta)> {
    cfg.validate()?;
    let mut gt = GroundTruthSet::new();
    let n = cfg.frames_per_video;
    let tracks_per_video =
        ((cfg.objects_per_frame * n as f64 / cfg.mean_track_duration).round() as usize).max(1);
    let velocity = Normal::new(0.0, 1.0).expect("unit normal");
    for v in 0..cfg.videos {
        let vid = video_name(v);
        let mut rng = frame_rng(cfg.seed, "scene", &vid, 0);
        let mut frames: BTreeMap<u64, Vec<BBox>> = (0..n).map(|f| (f, Vec::new())).collect();
        for t in 0..tracks_per_video {
            let dur = rng
                .random_range(0.5 * cfg.mean_track_duration..=1.5 * cfg.mean_track_duration)
                .round()
                .max(1.0) as u64;
            let start = rng.random_range(0..n);
            let w = rng.random_range(cfg.min_size..=cfg.max_size);
            let h = (w * rng.random_range(0.6..=1.0)).max(cfg.min_size.min(w));
            let x0 = rng.random_range(0.0..=cfg.width - w);
            let y0 = rng.random_range(0.0..=cfg.height - h);
            let (vx, vy) = (velocity.sample(&mut rng), 0.3 * velocity.sample(&mut rng));
            for f in start..(start + dur).min(n) {
                let dt = (f - start) as f64;
                let x1 = (x0 + vx * dt).clamp(0.0, cfg.width - w);
                let y1 = (y0 + vy * dt).clamp(0.0, cfg.height - h);
                let b = BBox::new(x1, y1, x1 + w, y1 + h, 1.0, cfg.category.clone())?
                    .with_track(format!("t{t}"));
                frames.get_mut(&f).expect("frame in range").push(b);
            }
        }
        for (f, boxes) in frames {
            gt.insert_frame(FrameKey::new(vid.clone(), f), boxes)?;
        }
    }
    Ok((gt, cfg.meta()))
}
