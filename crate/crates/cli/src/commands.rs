use std::collections::BTreeMap;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use rayon::prelude::*;

use receipt_core::baseline::default_params;
use receipt_core::detections::{parse_predictions, DEFAULT_MIN_SCORE};
use receipt_core::evaluation::{
    evaluate_named, match_predictions, parse_ground_truth, tune_baseline, EvalReport, ParamGrid, TuneOptions,
    DEFAULT_THRESHOLDS,
};
use receipt_core::io::{to_jsonl, write_atomic};
use receipt_core::synthgen::{
    expand_backgrounds, generate_dataset, list_images, load_corpus, procedural_corpus, split_portrait,
    BackgroundKind, DatasetOptions,
};
use receipt_core::{
    corners_from_detections, detect_baseline, rectify as rectify_image, BaselineParams, CornerSet, DetectionRecord,
    Error, GroundTruth, RasterImage,
};

pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: if e.is_input_error() { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn require_dir(flag: &str, p: &Path) -> CmdResult {
    if p.is_dir() {
        Ok(())
    } else {
        Err(Failure::input(format!("{flag} {}: not a directory", p.display())))
    }
}

fn require_file(flag: &str, p: &Path) -> CmdResult {
    if p.is_file() {
        Ok(())
    } else {
        Err(Failure::input(format!("{flag} {}: no such file", p.display())))
    }
}

fn create_dir(p: &Path) -> CmdResult {
    std::fs::create_dir_all(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))
}

fn open(p: &Path) -> Result<BufReader<std::fs::File>, Failure> {
    std::fs::File::open(p)
        .map(BufReader::new)
        .map_err(|e| Failure::input(format!("{}: {e}", p.display())))
}

#[derive(Clone)]
pub struct Thresholds(Vec<f64>);

fn parse_thresholds(s: &str) -> Result<Thresholds, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("`{t}`: {e}")))
        .collect::<Result<_, _>>()?;
    if v.is_empty() || v.iter().any(|d| !d.is_finite() || *d < 0.0) {
        return Err("thresholds must be non-negative numbers".into());
    }
    Ok(Thresholds(v))
}

fn default_thresholds() -> Vec<f64> {
    DEFAULT_THRESHOLDS.to_vec()
}

/// `default`, `tuned`, or a JSON file with the four parameter fields.
fn load_params(spec: &str) -> Result<BaselineParams, Failure> {
    let p = match spec {
        "default" => default_params(),
        "tuned" => BaselineParams::tuned(),
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("--params {path}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| Failure::input(format!("--params {path}: {e}")))?
        }
    };
    p.validate()?;
    Ok(p)
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> CmdResult {
    let text = serde_json::to_string_pretty(v).map_err(|e| Failure::internal(e.to_string()))?;
    write_atomic(path, format!("{text}\n").as_bytes())?;
    Ok(())
}

fn file_stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Image files of `dir` keyed by file stem; duplicate stems are an input error.
fn images_by_id(dir: &Path) -> Result<BTreeMap<String, PathBuf>, Failure> {
    let mut out = BTreeMap::new();
    for p in list_images(dir)? {
        let id = file_stem(&p);
        if let Some(prev) = out.insert(id.clone(), p) {
            return Err(Failure::input(format!("two images share the id `{id}` ({})", prev.display())));
        }
    }
    Ok(out)
}

#[derive(Args)]
pub struct GenerateArgs {
    /// Directory of tightly cropped portrait receipt images.
    #[arg(long)]
    receipts: PathBuf,
    /// Directory of background images (a 90-degree rotation of each is added).
    #[arg(long)]
    backgrounds: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Augmented versions per rectilinear scene.
    #[arg(long, default_value_t = 2)]
    variants: usize,
    /// Also write Pascal-VOC XML annotations.
    #[arg(long)]
    voc: bool,
}

pub fn generate(a: GenerateArgs) -> CmdResult {
    require_dir("--receipts", &a.receipts)?;
    require_dir("--backgrounds", &a.backgrounds)?;
    let (receipts, rejected) = split_portrait(load_corpus(&a.receipts)?);
    for id in &rejected {
        log::warn!("rejecting receipt {id}: not a portrait crop");
    }
    if !rejected.is_empty() {
        eprintln!("rejected {} non-portrait receipt(s): {}", rejected.len(), rejected.join(", "));
    }
    if receipts.is_empty() {
        return Err(Failure::input(format!("--receipts {}: no usable receipt images", a.receipts.display())));
    }
    let backgrounds = load_corpus(&a.backgrounds)?;
    if backgrounds.is_empty() {
        return Err(Failure::input(format!("--backgrounds {}: no images", a.backgrounds.display())));
    }
    let mut opts = DatasetOptions { seed: a.seed, voc: a.voc, ..Default::default() };
    opts.augmentation.variants_per_scene = a.variants;
    create_dir(&a.out)?;
    let s = generate_dataset(&a.out, &receipts, &expand_backgrounds(backgrounds), &opts)?;
    println!(
        "{} images from {} scenes ({} scenes and {} variants skipped) in {}",
        s.images,
        s.accepted_scenes,
        s.skipped_scenes,
        s.skipped_variants,
        a.out.display()
    );
    Ok(())
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Method {
    Baseline,
    Predictions,
}

#[derive(Args)]
pub struct DetectArgs {
    #[arg(long, value_enum, default_value = "baseline")]
    method: Method,
    /// Directory of images to run the baseline on.
    #[arg(long, required_if_eq("method", "baseline"))]
    images: Option<PathBuf>,
    /// Existing predictions to validate and reduce to one box per corner.
    #[arg(long, required_if_eq("method", "predictions"))]
    predictions: Option<PathBuf>,
    /// Baseline parameters: `default`, `tuned`, or a JSON file.
    #[arg(long, default_value = "tuned")]
    params: String,
    #[arg(long, default_value_t = DEFAULT_MIN_SCORE)]
    min_score: f64,
    /// Output predictions JSONL.
    #[arg(long)]
    out: PathBuf,
}

fn baseline_predictions(images: &Path, params: &BaselineParams) -> Result<Vec<DetectionRecord>, Failure> {
    let files: Vec<_> = images_by_id(images)?.into_iter().collect();
    let records = files
        .par_iter()
        .map(|(id, path)| {
            let img = RasterImage::load(path)?;
            let corners = detect_baseline(&img, params)?;
            Ok(DetectionRecord::from_corners(id.clone(), img.width(), img.height(), corners.as_ref()))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(records)
}

pub fn detect(a: DetectArgs) -> CmdResult {
    let records = match a.method {
        Method::Baseline => {
            let dir = a.images.expect("required by clap");
            require_dir("--images", &dir)?;
            let params = load_params(&a.params)?;
            baseline_predictions(&dir, &params)?
        }
        Method::Predictions => {
            let path = a.predictions.expect("required by clap");
            require_file("--predictions", &path)?;
            parse_predictions(open(&path)?)?
                .into_iter()
                .map(|r| {
                    let c = corners_from_detections(&r, a.min_score);
                    DetectionRecord::from_corners(r.image_id, r.width, r.height, c.as_ref())
                })
                .collect()
        }
    };
    write_atomic(&a.out, to_jsonl(&records).as_bytes())?;
    let found = records.iter().filter(|r| !r.detections.is_empty()).count();
    println!("{found} of {} images with four corners -> {}", records.len(), a.out.display());
    Ok(())
}

#[derive(Args)]
pub struct RectifyArgs {
    #[arg(long)]
    images: PathBuf,
    /// Ground-truth style corners JSONL.
    #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
    corners: Option<PathBuf>,
    /// Predictions JSONL; images without all four corners are skipped.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MIN_SCORE)]
    min_score: f64,
    /// Output directory for `<image_id>.png`.
    #[arg(long)]
    out: PathBuf,
}

fn rectify_all(images: &Path, jobs: Vec<(String, Option<CornerSet>)>, out: &Path) -> Result<usize, Failure> {
    let files = images_by_id(images)?;
    let missing: Vec<&str> = jobs.iter().filter(|(id, _)| !files.contains_key(id)).map(|(id, _)| id.as_str()).collect();
    if !missing.is_empty() {
        return Err(Failure::input(format!("no image for ids: {}", missing.join(", "))));
    }
    create_dir(out)?;
    let done = jobs
        .par_iter()
        .map(|(id, corners)| {
            let Some(c) = corners else {
                log::warn!("{id}: no corners, skipped");
                return Ok(0);
            };
            let img = RasterImage::load(&files[id])?;
            rectify_image(&img, c)?.save(&out.join(format!("{id}.png")))?;
            Ok(1)
        })
        .collect::<Result<Vec<usize>, Error>>()?;
    Ok(done.into_iter().sum())
}

pub fn rectify(a: RectifyArgs) -> CmdResult {
    require_dir("--images", &a.images)?;
    let jobs: Vec<(String, Option<CornerSet>)> = if let Some(path) = &a.corners {
        require_file("--corners", path)?;
        parse_ground_truth(open(path)?)?
            .into_iter()
            .map(|g| (g.image_id, Some(g.corners)))
            .collect()
    } else {
        let path = a.predictions.as_ref().expect("required by clap");
        require_file("--predictions", path)?;
        parse_predictions(open(path)?)?
            .into_iter()
            .map(|r| {
                let c = corners_from_detections(&r, a.min_score);
                (r.image_id, c)
            })
            .collect()
    };
    let n = jobs.len();
    let done = rectify_all(&a.images, jobs, &a.out)?;
    println!("rectified {done} of {n} images into {}", a.out.display());
    Ok(())
}

#[derive(Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    ground_truth: PathBuf,
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_SCORE)]
    min_score: f64,
    /// Comma-separated pixel distances.
    #[arg(long, value_parser = parse_thresholds, default_value = "10,20,30,40,50")]
    thresholds: Thresholds,
    /// Label for the report rows.
    #[arg(long, default_value = "predictions")]
    name: String,
    /// Write the report as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the report as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn evaluate_files(
    name: &str,
    ground_truth: &Path,
    predictions: &Path,
    min_score: f64,
    thresholds: &[f64],
) -> Result<EvalReport, Failure> {
    require_file("--ground-truth", ground_truth)?;
    require_file("--predictions", predictions)?;
    let truth = parse_ground_truth(open(ground_truth)?)?;
    let preds = parse_predictions(open(predictions)?)?;
    let pairs = match_predictions(&truth, &preds, min_score)?;
    Ok(evaluate_named(name, &pairs, thresholds)?)
}

fn emit_report(r: &EvalReport, out: Option<&Path>, csv: Option<&Path>) -> CmdResult {
    print!("{}", r.to_table());
    if let Some(p) = out {
        write_json(p, r)?;
    }
    if let Some(p) = csv {
        write_atomic(p, EvalReport::to_csv(std::slice::from_ref(r)).as_bytes())?;
    }
    Ok(())
}

pub fn evaluate(a: EvaluateArgs) -> CmdResult {
    let r = evaluate_files(&a.name, &a.ground_truth, &a.predictions, a.min_score, &a.thresholds.0)?;
    emit_report(&r, a.out.as_deref(), a.csv.as_deref())
}

#[derive(Args)]
pub struct TuneArgs {
    /// Dataset directory with `ground_truth.jsonl` and `images/`.
    #[arg(long)]
    validation: PathBuf,
    /// `full` or a JSON file with `kernels`, `t1`, `t2` and `epsilons` arrays.
    #[arg(long, default_value = "full")]
    grid: String,
    /// Append finished combinations here so an interrupted run can resume.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Reuse results from `--checkpoint`.
    #[arg(long, requires = "checkpoint")]
    resume: bool,
    /// Output file for the best parameters.
    #[arg(long)]
    out: PathBuf,
    /// Also write the winning report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

fn load_validation(dir: &Path) -> Result<Vec<(RasterImage, GroundTruth)>, Failure> {
    let gt_path = dir.join("ground_truth.jsonl");
    require_file("--validation", &gt_path)?;
    let truth = parse_ground_truth(open(&gt_path)?)?;
    let images = images_by_id(&dir.join("images"))?;
    let missing: Vec<&str> = truth
        .iter()
        .filter(|g| !images.contains_key(&g.image_id))
        .map(|g| g.image_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(Failure::input(format!("no image for ids: {}", missing.join(", "))));
    }
    let loaded = truth
        .into_par_iter()
        .map(|g| Ok((RasterImage::load(&images[&g.image_id])?, g)))
        .collect::<Result<Vec<_>, Error>>()?;
    Ok(loaded)
}

pub fn tune(a: TuneArgs) -> CmdResult {
    require_dir("--validation", &a.validation)?;
    let grid = match a.grid.as_str() {
        "full" => ParamGrid::full(),
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("--grid {path}: {e}")))?;
            serde_json::from_str(&text).map_err(|e| Failure::input(format!("--grid {path}: {e}")))?
        }
    };
    grid.validate()?;
    let validation = load_validation(&a.validation)?;
    log::info!("tuning {} combinations on {} images", grid.len(), validation.len());
    let opts = TuneOptions { checkpoint: a.checkpoint, resume: a.resume };
    let outcome = tune_baseline(&validation, &grid, &opts)?;
    write_json(&a.out, &outcome.params)?;
    if let Some(p) = &a.report {
        write_json(p, &outcome.report)?;
    }
    println!(
        "best {:?} ({} evaluated, {} resumed)",
        outcome.params, outcome.evaluated, outcome.resumed
    );
    print!("{}", outcome.report.to_table());
    Ok(())
}

#[derive(Args)]
pub struct DemoArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of procedural receipts.
    #[arg(long, default_value_t = 4)]
    count: usize,
    #[arg(long, default_value_t = 2)]
    variants: usize,
    #[arg(long, default_value = "tuned")]
    params: String,
}

pub fn demo(a: DemoArgs) -> CmdResult {
    if a.count == 0 {
        return Err(Failure::input("--count must be at least 1"));
    }
    let params = load_params(&a.params)?;
    let kinds = [BackgroundKind::Black, BackgroundKind::Textured, BackgroundKind::NearWhite];
    let (receipts, backgrounds) = procedural_corpus(a.seed, a.count, kinds.len(), &kinds, (540, 960));
    let mut opts = DatasetOptions { seed: a.seed, voc: true, ..Default::default() };
    opts.augmentation.variants_per_scene = a.variants;

    let data = a.out.join("dataset");
    create_dir(&data)?;
    let summary = generate_dataset(&data, &receipts, &expand_backgrounds(backgrounds), &opts)?;
    println!("generated {} images in {}", summary.images, data.display());

    let preds = baseline_predictions(&data.join("images"), &params)?;
    let preds_path = a.out.join("predictions.jsonl");
    write_atomic(&preds_path, to_jsonl(&preds).as_bytes())?;

    let jobs = preds
        .iter()
        .map(|r| (r.image_id.clone(), corners_from_detections(r, DEFAULT_MIN_SCORE)))
        .collect();
    let rectified = rectify_all(&data.join("images"), jobs, &a.out.join("rectified"))?;
    println!("rectified {rectified} of {} images", preds.len());

    let report = evaluate_files(
        "baseline",
        &data.join("ground_truth.jsonl"),
        &preds_path,
        DEFAULT_MIN_SCORE,
        &default_thresholds(),
    )?;
    emit_report(&report, Some(&a.out.join("report.json")), Some(&a.out.join("report.csv")))
}
