//! The `detfuse` command line.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use detfuse::detections::GroundTruthSet;
use detfuse::eval::EvalConfig;
use detfuse::io::{
    export_soft_targets, read_category_map, read_detections, read_frame_list, read_ground_truth, read_image_index,
    read_meta, write_atomic, write_frame_list, write_json, write_jsonl, DetectionFormat, ImageIndex,
};
use detfuse::recipe::{run_recipe, Recipe};
use detfuse::{
    coco_map, ensemble_sets, fuse_sets, map_to_superclass, median_object_duration, override_with_ground_truth,
    sample_label_frames, DetectionSet, Error, FrameKey, FuseConfig, MergeConfig, MergePolicy, Result,
};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "detfuse", version, about = "Merge, fuse and evaluate object detections")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ensemble detections from several detectors with consensus reweighting.
    Merge(MergeArgs),
    /// Fuse two detection sources, down-weighting boxes found by only one.
    Fuse(FuseArgs),
    /// COCO-style mAP@[.5:.95] of a detection set against ground truth.
    Eval(EvalArgs),
    /// Run a synthetic experiment recipe.
    Synth(SynthArgs),
    /// Pick uniformly spaced frames for labeling.
    SampleFrames(SampleArgs),
    /// Corpus counts and median object duration.
    Stats(StatsArgs),
    /// Rename categories to superclasses.
    MapCategories(MapArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Jsonl,
    CocoResults,
}

#[derive(Args, Debug)]
struct InputFormat {
    /// Format of the detection inputs.
    #[arg(long, value_enum, default_value = "jsonl")]
    format: Format,
    /// Image id to frame table, required for coco-results inputs.
    #[arg(long)]
    image_index: Option<PathBuf>,
}

impl InputFormat {
    fn reader(&self) -> Result<Reader> {
        let images = match (self.format, &self.image_index) {
            (Format::CocoResults, Some(p)) => Some(read_image_index(p)?),
            (Format::CocoResults, None) => {
                return Err(Error::InvalidConfig("coco-results input needs --image-index".into()))
            }
            (Format::Jsonl, _) => None,
        };
        Ok(Reader { images })
    }
}

struct Reader {
    images: Option<ImageIndex>,
}

impl Reader {
    /// COCO results carry no detector, so the file stem stands in for it.
    fn read(&self, path: &Path) -> Result<DetectionSet> {
        let format = match &self.images {
            None => DetectionFormat::Jsonl,
            Some(images) => DetectionFormat::CocoResults {
                images: images.clone(),
                detector_id: path
                    .file_stem()
                    .map_or_else(|| "detections".into(), |s| s.to_string_lossy().into_owned()),
            },
        };
        read_detections(path, &format)
    }
}

#[derive(Args, Debug)]
struct MergeArgs {
    /// Detection files, one or more detectors each.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.7)]
    iou_thresh: f64,
    #[arg(long, default_value_t = 3.0)]
    beta: f64,
    /// Consensus count whose scores are left unchanged.
    #[arg(long, default_value_t = 2)]
    n_ref: u32,
    #[arg(long, default_value = "reweight")]
    policy: MergePolicy,
    /// Detector id written on merged boxes.
    #[arg(long, default_value = "ensemble")]
    source_id: String,
    #[command(flatten)]
    input: InputFormat,
}

#[derive(Args, Debug)]
struct FuseArgs {
    first: PathBuf,
    second: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = 0.3)]
    iou_thresh: f64,
    /// Factor applied to boxes only one source found.
    #[arg(long, default_value_t = 0.5)]
    downweight: f64,
    /// Ground truth that replaces the output on labeled frames.
    #[arg(long, requires = "labeled_frames")]
    override_gt: Option<PathBuf>,
    /// Frame list (`video_id frame_id` per line) for --override-gt.
    #[arg(long, requires = "override_gt")]
    labeled_frames: Option<PathBuf>,
    #[arg(long, default_value = "fused")]
    source_id: String,
    #[command(flatten)]
    input: InputFormat,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    dets: PathBuf,
    /// Where to write the JSON report.
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    max_dets: usize,
    #[arg(long, default_value_t = 101)]
    recall_points: usize,
    #[command(flatten)]
    input: InputFormat,
}

#[derive(Args, Debug)]
struct SynthArgs {
    recipe: PathBuf,
    /// Output directory, created if missing.
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Corpus metadata giving frame counts.
    #[arg(long, conflicts_with = "gt", required_unless_present = "gt")]
    meta: Option<PathBuf>,
    /// Ground truth; frame counts are taken as the last annotated frame + 1.
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    budget_fraction: f64,
    /// Frame list output; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[arg(long)]
    gt: PathBuf,
    /// Also write the statistics as JSON.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct MapArgs {
    input: PathBuf,
    #[arg(long)]
    category_map: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 1 for invalid data or configuration,
/// 2 for IO and parse failures and for usage errors.
pub fn run_command<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io_or_parse() {
                2
            } else {
                1
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Merge(a) => merge(a),
        Command::Fuse(a) => fuse(a),
        Command::Eval(a) => eval(a),
        Command::Synth(a) => synth(a),
        Command::SampleFrames(a) => sample_frames(a),
        Command::Stats(a) => stats(a),
        Command::MapCategories(a) => map_categories(a),
    }
}

fn merge(a: MergeArgs) -> Result<()> {
    let cfg = MergeConfig {
        iou_thresh: a.iou_thresh,
        beta: a.beta,
        n_ref: a.n_ref,
        policy: a.policy,
    };
    cfg.validate()?;
    let reader = a.input.reader()?;
    let sets = a.inputs.iter().map(|p| reader.read(p)).collect::<Result<Vec<_>>>()?;
    let merged = ensemble_sets(&sets, &cfg, &a.source_id)?;
    export_soft_targets(&merged, &a.output)
}

fn fuse(a: FuseArgs) -> Result<()> {
    let cfg = FuseConfig {
        iou_thresh: a.iou_thresh,
        unmatched_downweight: a.downweight,
    };
    cfg.validate()?;
    let reader = a.input.reader()?;
    let first = reader.read(&a.first)?;
    let second = reader.read(&a.second)?;
    let mut fused = fuse_sets(&first, &second, &cfg, &a.source_id)?;
    if let (Some(gt_path), Some(frames_path)) = (&a.override_gt, &a.labeled_frames) {
        let gt = read_ground_truth(gt_path)?;
        let labeled = read_frame_list(frames_path)?;
        fused = override_with_ground_truth(&fused, &with_empty_frames(gt, &labeled), &labeled)?;
    }
    export_soft_targets(&fused, &a.output)
}

/// jsonl cannot hold a frame without boxes, so a labeled frame missing from
/// a ground-truth file counts as annotated-empty as long as its video appears
/// in the file.
fn with_empty_frames(mut gt: GroundTruthSet, labeled: &BTreeSet<FrameKey>) -> GroundTruthSet {
    let videos: BTreeSet<String> = gt.frames.keys().map(|k| k.video_id.clone()).collect();
    for key in labeled {
        if videos.contains(&key.video_id) {
            gt.frames.entry(key.clone()).or_default();
        }
    }
    gt
}

fn eval(a: EvalArgs) -> Result<()> {
    let cfg = EvalConfig {
        recall_points: a.recall_points,
        max_dets_per_frame: a.max_dets,
        ..Default::default()
    };
    let gt = read_ground_truth(&a.gt)?;
    let dets = a.input.reader()?.read(&a.dets)?;
    let report = coco_map(&dets, &gt, &cfg)?;
    if let Some(out) = &a.output {
        write_json(out, &report)?;
    }
    print!("{}", report.to_table());
    Ok(())
}

fn synth(a: SynthArgs) -> Result<()> {
    let recipe = Recipe::load(&a.recipe)?;
    let base = a.recipe.parent().unwrap_or(Path::new("."));
    let out = run_recipe(&recipe, base)?;
    std::fs::create_dir_all(&a.output).map_err(|e| Error::Io {
        path: a.output.clone(),
        source: e,
    })?;
    let dir = &a.output;
    let gt = out.ground_truth.to_detections("gt");
    write_atomic(&dir.join("gt.jsonl"), |w| write_jsonl(&gt, w))?;
    write_json(&dir.join("meta.json"), &out.meta)?;
    for d in &out.detectors {
        write_atomic(&dir.join(format!("{}.jsonl", d.source_id)), |w| write_jsonl(d, w))?;
    }
    if let Some(e) = &out.ensemble {
        export_soft_targets(e, &dir.join("ensemble.jsonl"))?;
    }
    if let Some(f) = &out.fused {
        export_soft_targets(f, &dir.join("fused.jsonl"))?;
    }
    for (fraction, frames) in &out.labeled_frames {
        write_atomic(&dir.join(format!("labeled_{fraction}.txt")), |w| write_frame_list(frames, w))?;
    }
    write_json(&dir.join("summary.json"), &out.summary)?;

    for (id, m) in &out.summary.detectors {
        println!("{id:<16} {m:.4}");
    }
    for (label, m) in [("ensemble", out.summary.ensemble), ("fused", out.summary.fused)] {
        if let Some(m) = m {
            println!("{label:<16} {m:.4}");
        }
    }
    Ok(())
}

fn sample_frames(a: SampleArgs) -> Result<()> {
    let lengths = match (&a.meta, &a.gt) {
        (Some(meta), _) => read_meta(meta)?.video_lengths(),
        (None, Some(gt)) => read_ground_truth(gt)?.video_lengths(),
        (None, None) => unreachable!("clap requires one of --meta / --gt"),
    };
    let frames = sample_label_frames(&lengths, a.budget_fraction)?;
    match &a.output {
        Some(path) => write_atomic(path, |w| write_frame_list(&frames, w)),
        None => write_frame_list(&frames, std::io::stdout().lock()).map_err(|e| Error::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
    }
}

#[derive(Serialize)]
struct Stats {
    videos: usize,
    frames: usize,
    boxes: usize,
    tracks: usize,
    boxes_per_category: BTreeMap<String, usize>,
    /// Absent when the ground truth has no track ids.
    median_object_duration: Option<f64>,
}

fn stats(a: StatsArgs) -> Result<()> {
    let gt = read_ground_truth(&a.gt)?;
    let mut per_category: BTreeMap<String, usize> = BTreeMap::new();
    let mut tracks = BTreeSet::new();
    for (key, boxes) in &gt.frames {
        for b in boxes {
            *per_category.entry(b.category.clone()).or_default() += 1;
            if let Some(t) = &b.track_id {
                tracks.insert((key.video_id.as_str(), t.as_str()));
            }
        }
    }
    let median = match median_object_duration(&gt) {
        Ok(m) => Some(m),
        Err(Error::NoTracks) => None,
        Err(e) => return Err(e),
    };
    let s = Stats {
        videos: gt.video_lengths().len(),
        frames: gt.frames.len(),
        boxes: gt.num_boxes(),
        tracks: tracks.len(),
        boxes_per_category: per_category,
        median_object_duration: median,
    };
    if let Some(out) = &a.output {
        write_json(out, &s)?;
    }
    let mut o = std::io::stdout().lock();
    let _ = writeln!(o, "videos                  {}", s.videos);
    let _ = writeln!(o, "annotated frames        {}", s.frames);
    let _ = writeln!(o, "boxes                   {}", s.boxes);
    let _ = writeln!(o, "tracks                  {}", s.tracks);
    match s.median_object_duration {
        Some(m) => {
            let _ = writeln!(o, "median object duration  {m}");
        }
        None => {
            let _ = writeln!(o, "median object duration  n/a (no track ids)");
        }
    }
    for (c, n) in &s.boxes_per_category {
        let _ = writeln!(o, "  {c:<21} {n}");
    }
    Ok(())
}

fn map_categories(a: MapArgs) -> Result<()> {
    let cmap = read_category_map(&a.category_map)?;
    let dets = read_detections(&a.input, &DetectionFormat::Jsonl)?;
    let mapped = map_to_superclass(&dets, &cmap)?;
    write_atomic(&a.output, |w| write_jsonl(&mapped, w))
}
