//! Corpus loading and dataset emission.

use std::fmt::Write as _;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::GroundTruth;
use crate::geometry::{CornerLabel, CornerSet, Point2};
use crate::imagecore::RasterImage;
use crate::io::write_atomic;

use super::{augment_with_retries, compose_scene, AugmentationConfig, Provenance, SceneConfig, SyntheticSample};

#[derive(Debug, Clone, PartialEq)]
pub struct NamedImage {
    pub id: String,
    pub image: RasterImage,
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

/// PNG/JPEG files directly inside `dir`, sorted by path.
pub fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

/// Every image of [`list_images`], loaded as RGB and named by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<NamedImage>> {
    list_images(dir)?
        .par_iter()
        .map(|p| {
            Ok(NamedImage {
                id: p.file_name().expect("file path").to_string_lossy().into_owned(),
                image: RasterImage::load(p)?,
            })
        })
        .collect()
}

/// Splits a corpus into portrait images (height >= width) and the ids of the rest.
pub fn split_portrait(items: Vec<NamedImage>) -> (Vec<NamedImage>, Vec<String>) {
    let (ok, bad): (Vec<_>, Vec<_>) = items.into_iter().partition(|n| n.image.height() >= n.image.width());
    (ok, bad.into_iter().map(|n| n.id).collect())
}

/// Adds a 90-degree-rotated copy after each background.
pub fn expand_backgrounds(backgrounds: Vec<NamedImage>) -> Vec<NamedImage> {
    let mut out = Vec::with_capacity(backgrounds.len() * 2);
    for b in backgrounds {
        let rotated = NamedImage {
            id: format!("{}#rot90", b.id),
            image: b.image.rotate90(),
        };
        out.push(b);
        out.push(rotated);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerRecord {
    pub label: CornerLabel,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRecord {
    pub label: CornerLabel,
    pub xmin: f64,
    pub ymin: f64,
    pub xmax: f64,
    pub ymax: f64,
}

impl BoxRecord {
    fn new(label: CornerLabel, b: [f64; 4]) -> Self {
        BoxRecord {
            label,
            xmin: b[0],
            ymin: b[1],
            xmax: b[2],
            ymax: b[3],
        }
    }
}

/// One line of `manifest.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub image: String,
    pub width: usize,
    pub height: usize,
    pub corners: Vec<CornerRecord>,
    pub boxes: Vec<BoxRecord>,
    pub raw_boxes_10px: Vec<BoxRecord>,
    pub provenance: Provenance,
}

impl ManifestRecord {
    pub fn from_sample(image: String, s: &SyntheticSample) -> Self {
        ManifestRecord {
            image,
            width: s.image.width(),
            height: s.image.height(),
            corners: s
                .corners
                .labeled()
                .iter()
                .map(|&(label, p)| CornerRecord { label, x: p.x, y: p.y })
                .collect(),
            boxes: s.boxes.iter().map(|b| BoxRecord::new(b.label, b.bounds())).collect(),
            raw_boxes_10px: CornerLabel::ALL
                .iter()
                .zip(&s.raw_boxes)
                .map(|(&l, &b)| BoxRecord::new(l, b))
                .collect(),
            provenance: s.provenance.clone(),
        }
    }

    pub fn corner_set(&self) -> Result<CornerSet> {
        let mut slots: [Option<Point2>; 4] = [None; 4];
        for c in &self.corners {
            if slots[c.label.index()].replace(Point2::new(c.x, c.y)).is_some() {
                return Err(Error::Report(format!("{}: duplicate {} corner", self.image, c.label)));
            }
        }
        match slots {
            [Some(tl), Some(tr), Some(br), Some(bl)] => Ok(CornerSet::new(tl, tr, br, bl)),
            _ => Err(Error::Report(format!("{}: needs exactly one corner per label", self.image))),
        }
    }

    /// Image id used by ground truth and predictions: the file stem.
    pub fn image_id(&self) -> String {
        Path::new(&self.image)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.image.clone())
    }

    pub fn ground_truth(&self) -> Result<GroundTruth> {
        Ok(GroundTruth {
            image_id: self.image_id(),
            corners: self.corner_set()?,
        })
    }

    /// Pascal-VOC-style annotation with integer boxes rounded outward.
    pub fn to_voc_xml(&self) -> String {
        let file = Path::new(&self.image)
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let mut x = String::new();
        x.push_str("<annotation>\n  <folder>images</folder>\n");
        let _ = writeln!(x, "  <filename>{}</filename>", xml_escape(&file));
        let _ = writeln!(
            x,
            "  <size>\n    <width>{}</width>\n    <height>{}</height>\n    <depth>3</depth>\n  </size>",
            self.width, self.height
        );
        let (mx, my) = (self.width as f64 - 1.0, self.height as f64 - 1.0);
        for b in &self.boxes {
            let r = [
                b.xmin.floor().clamp(0.0, mx),
                b.ymin.floor().clamp(0.0, my),
                b.xmax.ceil().clamp(0.0, mx),
                b.ymax.ceil().clamp(0.0, my),
            ];
            let _ = writeln!(
                x,
                "  <object>\n    <name>{}</name>\n    <difficult>0</difficult>\n    <bndbox>\n      \
                 <xmin>{}</xmin>\n      <ymin>{}</ymin>\n      <xmax>{}</xmax>\n      <ymax>{}</ymax>\n    \
                 </bndbox>\n  </object>",
                b.label, r[0] as i64, r[1] as i64, r[2] as i64, r[3] as i64
            );
        }
        x.push_str("</annotation>\n");
        x
    }
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

pub fn read_manifest(reader: impl BufRead) -> Result<Vec<ManifestRecord>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let err = |message: String| Error::Parse {
            line: i + 1,
            field: "<record>".into(),
            message,
        };
        let line = line.map_err(|e| err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| err(e.to_string()))?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub scene: SceneConfig,
    pub augmentation: AugmentationConfig,
    pub seed: u64,
    /// Also write one VOC XML file per image under `annotations/`.
    pub voc: bool,
}

/// Counts for a generation run. `images = accepted_scenes * (1 + variants_per_scene) - skipped_variants`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub seed: u64,
    pub receipts: usize,
    pub backgrounds: usize,
    pub variants_per_scene: usize,
    pub accepted_scenes: usize,
    pub skipped_scenes: usize,
    pub skipped_variants: usize,
    pub images: usize,
}

/// A finished sample and its output file stem.
#[derive(Debug, Clone)]
pub struct GeneratedImage {
    pub stem: String,
    pub sample: SyntheticSample,
}

struct SceneOutcome<T> {
    items: Vec<T>,
    composed: bool,
    skipped_variants: usize,
}

fn run_scene<T>(
    i: usize,
    receipts: &[NamedImage],
    backgrounds: &[NamedImage],
    opts: &DatasetOptions,
    map: &(impl Fn(GeneratedImage) -> Result<T> + Sync),
) -> Result<SceneOutcome<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    rng.set_stream(i as u64);
    let background = &backgrounds[rng.gen_range(0..backgrounds.len())];
    let n_inter = rng.gen_range(0..=opts.scene.max_interferers);
    let mut interferers = Vec::with_capacity(n_inter);
    if receipts.len() > 1 {
        for _ in 0..n_inter {
            let mut j = rng.gen_range(0..receipts.len() - 1);
            if j >= i {
                j += 1;
            }
            interferers.push(&receipts[j]);
        }
    }
    let per_scene = 1 + opts.augmentation.variants_per_scene;
    let mut base = match compose_scene(&receipts[i], &interferers, background, &opts.scene, &mut rng) {
        Ok(s) => s,
        Err(Error::Composition(msg)) => {
            log::warn!("skipping receipt {}: {msg}", receipts[i].id);
            return Ok(SceneOutcome {
                items: Vec::new(),
                composed: false,
                skipped_variants: 0,
            });
        }
        Err(e) => return Err(e),
    };
    base.provenance.seed = opts.seed;
    base.provenance.index = i * per_scene;

    let mut samples = Vec::with_capacity(per_scene);
    let mut skipped = 0;
    for v in 1..per_scene {
        match augment_with_retries(&base, &opts.augmentation, &mut rng)? {
            Some(mut s) => {
                s.provenance.index = i * per_scene + v;
                s.provenance.variant = v;
                samples.push(s);
            }
            None => {
                log::warn!(
                    "skipping variant {v} of receipt {} after {} attempts",
                    receipts[i].id,
                    opts.augmentation.max_retries
                );
                skipped += 1;
            }
        }
    }
    samples.insert(0, base);
    let items = samples
        .into_iter()
        .map(|mut s| {
            s.expand_boxes();
            map(GeneratedImage {
                stem: format!("{:06}", s.provenance.index),
                sample: s,
            })
        })
        .collect::<Result<_>>()?;
    Ok(SceneOutcome {
        items,
        composed: true,
        skipped_variants: skipped,
    })
}

/// Generates every sample and passes it through `map` in parallel, returning
/// the mapped values in output order.
///
/// Each receipt draws from its own random stream keyed by `(seed, receipt index)`,
/// so results do not depend on scheduling or thread count.
pub fn generate_samples<T: Send>(
    receipts: &[NamedImage],
    backgrounds: &[NamedImage],
    opts: &DatasetOptions,
    map: impl Fn(GeneratedImage) -> Result<T> + Sync,
) -> Result<(Vec<T>, DatasetSummary)> {
    if receipts.is_empty() {
        return Err(Error::param("receipts", "corpus is empty"));
    }
    if backgrounds.is_empty() {
        return Err(Error::param("backgrounds", "corpus is empty"));
    }
    opts.scene.validate()?;
    opts.augmentation.validate()?;
    let mut summary = DatasetSummary {
        seed: opts.seed,
        receipts: receipts.len(),
        backgrounds: backgrounds.len(),
        variants_per_scene: opts.augmentation.variants_per_scene,
        ..Default::default()
    };
    // Bounded batches keep at most a few canvases per worker in memory.
    let batch = rayon::current_num_threads().max(1) * 2;
    let mut out = Vec::new();
    for start in (0..receipts.len()).step_by(batch) {
        let end = (start + batch).min(receipts.len());
        let scenes: Vec<SceneOutcome<T>> = (start..end)
            .into_par_iter()
            .map(|i| run_scene(i, receipts, backgrounds, opts, &map))
            .collect::<Result<_>>()?;
        for s in scenes {
            if s.composed {
                summary.accepted_scenes += 1;
            } else {
                summary.skipped_scenes += 1;
            }
            summary.skipped_variants += s.skipped_variants;
            summary.images += s.items.len();
            out.extend(s.items);
        }
    }
    Ok((out, summary))
}

/// Writes `images/NNNNNN.png`, `manifest.jsonl`, `ground_truth.jsonl`,
/// `summary.json` and optionally `annotations/NNNNNN.xml` under `out_dir`.
pub fn generate_dataset(
    out_dir: &Path,
    receipts: &[NamedImage],
    backgrounds: &[NamedImage],
    opts: &DatasetOptions,
) -> Result<DatasetSummary> {
    let images = out_dir.join("images");
    std::fs::create_dir_all(&images).map_err(|e| Error::io(&images, e))?;
    let annotations = out_dir.join("annotations");
    if opts.voc {
        std::fs::create_dir_all(&annotations).map_err(|e| Error::io(&annotations, e))?;
    }
    let (records, summary) = generate_samples(receipts, backgrounds, opts, |g| {
        let rel = format!("images/{}.png", g.stem);
        g.sample.image.save(&out_dir.join(&rel))?;
        let record = ManifestRecord::from_sample(rel, &g.sample);
        if opts.voc {
            let path = annotations.join(format!("{}.xml", g.stem));
            write_atomic(&path, record.to_voc_xml().as_bytes())?;
        }
        Ok(record)
    })?;

    let mut manifest = String::new();
    let mut truth = String::new();
    for r in &records {
        manifest.push_str(&serde_json::to_string(r).expect("manifest json"));
        manifest.push('\n');
        truth.push_str(&r.ground_truth()?.to_json().to_string());
        truth.push('\n');
    }
    write_atomic(&out_dir.join("manifest.jsonl"), manifest.as_bytes())?;
    write_atomic(&out_dir.join("ground_truth.jsonl"), truth.as_bytes())?;
    let summary_json = serde_json::to_string_pretty(&summary).expect("summary json");
    write_atomic(&out_dir.join("summary.json"), summary_json.as_bytes())?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{procedural_corpus, BackgroundKind};

    fn small_opts(seed: u64, variants: usize) -> DatasetOptions {
        let mut o = DatasetOptions {
            seed,
            ..Default::default()
        };
        o.scene.canvas_width = 180;
        o.scene.canvas_height = 320;
        o.augmentation.variants_per_scene = variants;
        o
    }

    fn corpus() -> (Vec<NamedImage>, Vec<NamedImage>) {
        let (r, b) = procedural_corpus(5, 4, 2, &[BackgroundKind::Textured], (90, 160));
        let r = r
            .into_iter()
            .map(|n| NamedImage {
                image: n.image.resize(n.image.width() / 4, n.image.height() / 4).unwrap(),
                ..n
            })
            .collect();
        (r, expand_backgrounds(b))
    }

    #[test]
    fn one_receipt_without_variants_gives_one_image() {
        let (r, b) = corpus();
        let (items, summary) = generate_samples(&r[..1], &b, &small_opts(1, 0), Ok).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(summary.images, 1);
        assert_eq!(items[0].sample.boxes.len(), 4);
        assert_eq!(items[0].stem, "000000");
    }

    #[test]
    fn count_law_holds() {
        let (r, b) = corpus();
        let (items, s) = generate_samples(&r, &b, &small_opts(2, 2), |g| Ok(g.stem)).unwrap();
        assert_eq!(s.images, items.len());
        assert_eq!(s.images, s.accepted_scenes * 3 - s.skipped_variants);
        let mut sorted = items.clone();
        sorted.sort();
        assert_eq!(sorted, items);
    }

    #[test]
    fn written_dataset_is_reproducible() {
        let (r, b) = corpus();
        let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let mut opts = small_opts(7, 1);
        opts.voc = true;
        for d in &dirs {
            generate_dataset(d.path(), &r[..2], &b, &opts).unwrap();
        }
        for f in ["manifest.jsonl", "ground_truth.jsonl", "summary.json", "images/000001.png", "annotations/000001.xml"] {
            let a = std::fs::read(dirs[0].path().join(f)).unwrap();
            let c = std::fs::read(dirs[1].path().join(f)).unwrap();
            assert_eq!(a, c, "{f}");
        }
        let text = std::fs::read(dirs[0].path().join("manifest.jsonl")).unwrap();
        let records = read_manifest(&text[..]).unwrap();
        assert_eq!(records.len(), 4);
        assert_eq!(records[0].image, "images/000000.png");
        assert_eq!(records[0].image_id(), "000000");
        let gt = crate::evaluation::parse_ground_truth(
            &std::fs::read(dirs[0].path().join("ground_truth.jsonl")).unwrap()[..],
        )
        .unwrap();
        assert_eq!(gt[3].corners, records[3].corner_set().unwrap());
    }

    #[test]
    fn voc_xml_lists_four_labeled_boxes() {
        let (r, b) = corpus();
        let (items, _) = generate_samples(&r[..1], &b, &small_opts(3, 0), |g| {
            Ok(ManifestRecord::from_sample(format!("images/{}.png", g.stem), &g.sample))
        })
        .unwrap();
        let xml = items[0].to_voc_xml();
        assert!(xml.contains("<filename>000000.png</filename>"));
        for l in ["tl", "tr", "br", "bl"] {
            assert_eq!(xml.matches(&format!("<name>{l}</name>")).count(), 1);
        }
    }

    #[test]
    fn rotated_backgrounds_are_added() {
        let bg = vec![NamedImage {
            id: "a".into(),
            image: RasterImage::rgb(4, 2, [1, 2, 3]),
        }];
        let out = expand_backgrounds(bg);
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].id, "a#rot90");
        assert_eq!((out[1].image.width(), out[1].image.height()), (2, 4));
    }

    #[test]
    fn landscape_receipts_are_split_out() {
        let items = vec![
            NamedImage { id: "tall".into(), image: RasterImage::rgb(2, 4, [0, 0, 0]) },
            NamedImage { id: "wide".into(), image: RasterImage::rgb(4, 2, [0, 0, 0]) },
        ];
        let (ok, bad) = split_portrait(items);
        assert_eq!(ok.len(), 1);
        assert_eq!(bad, vec!["wide".to_string()]);
    }
}
