//! Exhaustive, resumable grid search over [`BaselineParams`].
//!
//! Work is split per `(kernel, canny threshold pair)`: each unit blurs once per
//! kernel, runs Canny once, extracts the largest contour once, and then scores
//! every epsilon on that contour. Completed combinations are appended to an
//! optional JSONL checkpoint so an interrupted sweep can resume.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::hash::{Hash, Hasher};
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::sync::Mutex;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::{corners_from_contour, largest_contour, BaselineParams};
use crate::error::{Error, Result};
use crate::imagecore::{canny, gaussian_blur, to_grayscale, RasterImage};

use super::{corner_errors, EvalReport, GroundTruth, DEFAULT_THRESHOLDS};

/// Distance at which candidates are ranked.
pub const OBJECTIVE_THRESHOLD: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub kernels: Vec<usize>,
    pub t1: Vec<f64>,
    pub t2: Vec<f64>,
    pub epsilons: Vec<f64>,
}

impl Default for ParamGrid {
    fn default() -> Self {
        Self::full()
    }
}

impl ParamGrid {
    /// Kernel 1..=21 step 2, thresholds 0..=500 step 50, epsilon 0.01..=0.10 step 0.01.
    pub fn full() -> Self {
        ParamGrid {
            kernels: (1..=21).step_by(2).collect(),
            t1: (0..=10).map(|i| i as f64 * 50.0).collect(),
            t2: (0..=10).map(|i| i as f64 * 50.0).collect(),
            epsilons: (1..=10).map(|i| i as f64 / 100.0).collect(),
        }
    }

    pub fn single(p: BaselineParams) -> Self {
        ParamGrid {
            kernels: vec![p.gaussian_kernel],
            t1: vec![p.canny_t1],
            t2: vec![p.canny_t2],
            epsilons: vec![p.epsilon_fraction],
        }
    }

    pub fn len(&self) -> usize {
        self.kernels.len() * self.t1.len() * self.t2.len() * self.epsilons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All combinations, kernel-major then t1, t2, epsilon.
    pub fn combinations(&self) -> impl Iterator<Item = BaselineParams> + '_ {
        self.kernels.iter().flat_map(move |&k| {
            self.t1.iter().flat_map(move |&a| {
                self.t2.iter().flat_map(move |&b| {
                    self.epsilons.iter().map(move |&e| BaselineParams {
                        gaussian_kernel: k,
                        canny_t1: a,
                        canny_t2: b,
                        epsilon_fraction: e,
                    })
                })
            })
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::param("grid", "every axis needs at least one value"));
        }
        for p in self.combinations() {
            p.validate()?;
        }
        Ok(())
    }
}

/// Outcome of one parameter combination over the whole validation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComboResult {
    pub params: BaselineParams,
    pub report: EvalReport,
}

impl ComboResult {
    fn objective(&self) -> (usize, usize) {
        let row = self
            .report
            .row(OBJECTIVE_THRESHOLD)
            .expect("objective threshold is always evaluated");
        (row.correct_receipts, row.correct_corners)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TuneOptions {
    /// JSONL checkpoint of completed combinations.
    pub checkpoint: Option<PathBuf>,
    /// Reuse results already present in `checkpoint`.
    pub resume: bool,
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub params: BaselineParams,
    pub report: EvalReport,
    pub evaluated: usize,
    pub resumed: usize,
}

fn key(p: &BaselineParams) -> (usize, u64, u64, u64) {
    (p.gaussian_kernel, p.canny_t1.to_bits(), p.canny_t2.to_bits(), p.epsilon_fraction.to_bits())
}

/// Ranking: more receipts correct at 50 px, then more corners, then smaller
/// kernel, then lexicographically smaller `(t1, t2, epsilon)`.
fn better(a: &ComboResult, b: &ComboResult) -> bool {
    let (ra, ca) = a.objective();
    let (rb, cb) = b.objective();
    if (ra, ca) != (rb, cb) {
        return (ra, ca) > (rb, cb);
    }
    let pa = (a.params.gaussian_kernel, a.params.canny_t1, a.params.canny_t2, a.params.epsilon_fraction);
    let pb = (b.params.gaussian_kernel, b.params.canny_t1, b.params.canny_t2, b.params.epsilon_fraction);
    pa.partial_cmp(&pb) == Some(std::cmp::Ordering::Less)
}

fn thresholds() -> Vec<f64> {
    let mut t = DEFAULT_THRESHOLDS.to_vec();
    if !t.contains(&OBJECTIVE_THRESHOLD) {
        t.push(OBJECTIVE_THRESHOLD);
    }
    t
}

fn fingerprint(validation: &[(RasterImage, GroundTruth)], grid: &ParamGrid) -> String {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for (img, gt) in validation {
        gt.image_id.hash(&mut h);
        for p in gt.corners.to_array() {
            p.x.to_bits().hash(&mut h);
            p.y.to_bits().hash(&mut h);
        }
        (img.width(), img.height(), img.channels()).hash(&mut h);
        img.data().hash(&mut h);
    }
    serde_json::to_string(grid).expect("grid json").hash(&mut h);
    format!("{:016x}", h.finish())
}

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    fingerprint: String,
    combinations: usize,
}

fn load_checkpoint(path: &PathBuf, fp: &str) -> Result<Vec<ComboResult>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header: CheckpointHeader = match lines.next() {
        Some(l) => serde_json::from_str(&l.map_err(|e| Error::io(path, e))?)
            .map_err(|e| Error::Checkpoint(format!("{}: bad header: {e}", path.display())))?,
        None => return Ok(Vec::new()),
    };
    if header.fingerprint != fp {
        return Err(Error::Checkpoint(format!(
            "{} was written for a different validation set or grid",
            path.display()
        )));
    }
    let all: Vec<String> = lines.collect::<std::io::Result<_>>().map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, l) in all.iter().enumerate() {
        match serde_json::from_str::<ComboResult>(l) {
            Ok(r) => out.push(r),
            // A torn final line from an interrupted write is dropped.
            Err(_) if i + 1 == all.len() => log::warn!("ignoring truncated checkpoint line {}", i + 2),
            Err(e) => return Err(Error::Checkpoint(format!("{}: line {}: {e}", path.display(), i + 2))),
        }
    }
    Ok(out)
}

/// Grid search maximizing receipt accuracy at 50 px on `validation`.
pub fn tune_baseline(
    validation: &[(RasterImage, GroundTruth)],
    grid: &ParamGrid,
    opts: &TuneOptions,
) -> Result<TuneOutcome> {
    if validation.is_empty() {
        return Err(Error::Report("empty validation set".into()));
    }
    grid.validate()?;
    let thresholds = thresholds();
    let fp = fingerprint(validation, grid);

    let mut done: HashMap<(usize, u64, u64, u64), ComboResult> = HashMap::new();
    if let (Some(path), true) = (&opts.checkpoint, opts.resume) {
        if path.exists() {
            for r in load_checkpoint(path, &fp)? {
                done.insert(key(&r.params), r);
            }
        }
    }
    let resumed = done.len();

    let writer = match &opts.checkpoint {
        Some(path) => {
            let mut f = if opts.resume && path.exists() {
                // Drop a torn tail so appends start on a fresh line.
                let mut text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                if !text.ends_with('\n') {
                    let cut = text.rfind('\n').map_or(0, |i| i + 1);
                    text.truncate(cut);
                    std::fs::write(path, &text).map_err(|e| Error::io(path, e))?;
                }
                OpenOptions::new().append(true).open(path).map_err(|e| Error::io(path, e))?
            } else {
                File::create(path).map_err(|e| Error::io(path, e))?
            };
            if !(opts.resume && resumed > 0) && f.metadata().map(|m| m.len() == 0).unwrap_or(true) {
                let header = CheckpointHeader {
                    fingerprint: fp.clone(),
                    combinations: grid.len(),
                };
                writeln!(f, "{}", serde_json::to_string(&header).expect("header json"))
                    .map_err(|e| Error::io(path, e))?;
            }
            Some(Mutex::new(f))
        }
        None => None,
    };

    let grays: Vec<RasterImage> = validation.par_iter().map(|(img, _)| to_grayscale(img)).collect();
    let results = Mutex::new(Vec::new());

    for &kernel in &grid.kernels {
        // Threshold pairs are order-insensitive, so group orderings sharing an edge map.
        let mut units: BTreeMap<(u64, u64), Vec<(f64, f64)>> = BTreeMap::new();
        for &a in &grid.t1 {
            for &b in &grid.t2 {
                let pending = grid.epsilons.iter().any(|&e| {
                    !done.contains_key(&key(&BaselineParams {
                        gaussian_kernel: kernel,
                        canny_t1: a,
                        canny_t2: b,
                        epsilon_fraction: e,
                    }))
                });
                if pending {
                    units.entry((a.min(b).to_bits(), a.max(b).to_bits())).or_default().push((a, b));
                }
            }
        }
        if units.is_empty() {
            continue;
        }
        log::info!("kernel {kernel}: {} edge configurations", units.len());
        let blurred: Vec<RasterImage> = grays
            .par_iter()
            .map(|g| gaussian_blur(g, kernel))
            .collect::<Result<_>>()?;

        let units: Vec<_> = units.into_iter().collect();
        units.par_iter().try_for_each(|((lo, hi), orderings)| -> Result<()> {
            let (lo, hi) = (f64::from_bits(*lo), f64::from_bits(*hi));
            let contours: Vec<_> = blurred
                .iter()
                .map(|b| canny(b, lo, hi).map(|e| largest_contour(&e)))
                .collect::<Result<_>>()?;
            let mut batch = Vec::new();
            for &eps in &grid.epsilons {
                let errors: Vec<_> = contours
                    .iter()
                    .zip(validation)
                    .map(|(c, (_, gt))| {
                        let pred = c.as_ref().and_then(|c| corners_from_contour(c, eps));
                        corner_errors(&gt.corners, pred.as_ref())
                    })
                    .collect();
                for &(a, b) in orderings {
                    let params = BaselineParams {
                        gaussian_kernel: kernel,
                        canny_t1: a,
                        canny_t2: b,
                        epsilon_fraction: eps,
                    };
                    if done.contains_key(&key(&params)) {
                        continue;
                    }
                    let report = EvalReport::from_errors("baseline", &errors, &thresholds)?;
                    batch.push(ComboResult { params, report });
                }
            }
            if let Some(w) = &writer {
                let mut text = String::new();
                for r in &batch {
                    text.push_str(&serde_json::to_string(r).expect("result json"));
                    text.push('\n');
                }
                let mut f = w.lock().expect("checkpoint lock");
                f.write_all(text.as_bytes())
                    .and_then(|_| f.flush())
                    .map_err(|e| Error::Checkpoint(e.to_string()))?;
            }
            results.lock().expect("results lock").extend(batch);
            Ok(())
        })?;
    }

    let mut all: Vec<ComboResult> = done.into_values().collect();
    all.extend(results.into_inner().expect("results lock"));
    let evaluated = all.len() - resumed;
    let best = all
        .iter()
        .filter(|r| {
            grid.combinations().any(|p| key(&p) == key(&r.params))
        })
        .fold(None::<&ComboResult>, |acc, r| match acc {
            Some(b) if !better(r, b) => Some(b),
            _ => Some(r),
        })
        .expect("non-empty grid");
    Ok(TuneOutcome {
        params: best.params,
        report: best.report.clone(),
        evaluated,
        resumed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_grid_has_13310_combinations() {
        let g = ParamGrid::full();
        assert_eq!(g.len(), 11 * 11 * 11 * 10);
        assert_eq!(g.len(), 13_310);
        assert_eq!(g.combinations().count(), 13_310);
        assert!(g.validate().is_ok());
    }

    #[test]
    fn grid_axes_match_the_search_ranges() {
        let g = ParamGrid::full();
        assert_eq!(g.kernels, vec![1, 3, 5, 7, 9, 11, 13, 15, 17, 19, 21]);
        assert_eq!(g.t1.first(), Some(&0.0));
        assert_eq!(g.t1.last(), Some(&500.0));
        assert_eq!(g.epsilons.first(), Some(&0.01));
        assert_eq!(g.epsilons.last(), Some(&0.1));
    }

    fn scene(w: usize, h: usize, x0: usize, y0: usize, x1: usize, y1: usize) -> (RasterImage, GroundTruth) {
        let img = RasterImage::from_fn_gray(w, h, |x, y| {
            if (x0..=x1).contains(&x) && (y0..=y1).contains(&y) { 250 } else { 10 }
        })
        .to_rgb();
        let (a, b, c, d) = (x0 as f64, y0 as f64, x1 as f64, y1 as f64);
        let corners = crate::geometry::CornerSet::new(
            Point2::new(a, b),
            Point2::new(c, b),
            Point2::new(c, d),
            Point2::new(a, d),
        );
        (img, GroundTruth { image_id: format!("{w}x{h}"), corners })
    }

    use crate::geometry::Point2;

    fn validation() -> Vec<(RasterImage, GroundTruth)> {
        vec![scene(120, 160, 20, 30, 90, 140), scene(100, 150, 10, 10, 70, 120)]
    }

    fn toy_grid() -> ParamGrid {
        ParamGrid {
            kernels: vec![1, 5],
            t1: vec![0.0, 400.0],
            t2: vec![50.0, 500.0],
            epsilons: vec![0.02, 0.1],
        }
    }

    #[test]
    fn single_combination_is_returned() {
        let p = BaselineParams::new(7, 450.0, 500.0, 0.03).unwrap();
        let out = tune_baseline(&validation(), &ParamGrid::single(p), &TuneOptions::default()).unwrap();
        assert_eq!(out.params, p);
        assert_eq!(out.evaluated, 1);
    }

    #[test]
    fn empty_validation_is_an_error() {
        assert!(tune_baseline(&[], &toy_grid(), &TuneOptions::default()).is_err());
    }

    #[test]
    fn objective_matches_a_fresh_evaluation() {
        let v = validation();
        let out = tune_baseline(&v, &toy_grid(), &TuneOptions::default()).unwrap();
        assert_eq!(out.evaluated, toy_grid().len());
        let pairs: Vec<_> = v
            .iter()
            .map(|(img, gt)| (gt.clone(), crate::baseline::detect_baseline(img, &out.params).unwrap()))
            .collect();
        let again = super::super::evaluate(&pairs, &thresholds()).unwrap();
        assert_eq!(again.rows, out.report.rows);
        assert_eq!(out.report.receipt_accuracy(50.0), Some(1.0));
        // Thresholds (400, 500) on a 240-level step find no edges, so kernel 1 with
        // the smallest thresholds and epsilon wins the tie-break.
        assert_eq!(out.params, BaselineParams::new(1, 0.0, 50.0, 0.02).unwrap());
    }

    #[test]
    fn checkpoint_resume_skips_finished_work() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("tune.jsonl");
        let v = validation();
        let opts = TuneOptions { checkpoint: Some(path.clone()), resume: false };
        let first = tune_baseline(&v, &toy_grid(), &opts).unwrap();

        // Simulate an interruption: keep the header and five results, plus a torn line.
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + toy_grid().len());
        let mut cut = lines[..6].join("\n");
        cut.push_str("\n{\"params\":");
        std::fs::write(&path, cut).unwrap();

        let opts = TuneOptions { checkpoint: Some(path.clone()), resume: true };
        let second = tune_baseline(&v, &toy_grid(), &opts).unwrap();
        assert_eq!(second.resumed, 5);
        assert_eq!(second.evaluated, toy_grid().len() - 5);
        assert_eq!(second.params, first.params);
        assert_eq!(std::fs::read_to_string(&path).unwrap().lines().count(), 1 + toy_grid().len());

        // A different validation set must not reuse the file.
        let other = vec![scene(90, 120, 5, 5, 60, 100)];
        assert!(matches!(tune_baseline(&other, &toy_grid(), &opts), Err(Error::Checkpoint(_))));
    }

    #[test]
    fn invalid_grid_is_rejected() {
        let mut g = ParamGrid::single(BaselineParams::tuned());
        g.kernels.push(4);
        assert!(g.validate().is_err());
        g.kernels.clear();
        assert!(g.validate().is_err());
    }
}
