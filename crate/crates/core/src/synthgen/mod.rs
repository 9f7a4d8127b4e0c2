//! Synthetic scene generation: compose a target receipt (plus unannotated
//! interferers) on a background, augment it projectively while tracking the
//! four target corners exactly, and emit annotated datasets.

mod dataset;
mod procedural;

pub use dataset::{
    expand_backgrounds, generate_dataset, generate_samples, list_images, load_corpus, read_manifest, split_portrait,
    BoxRecord, CornerRecord, DatasetOptions, DatasetSummary, GeneratedImage, ManifestRecord, NamedImage,
};
pub use procedural::{procedural_background, procedural_corpus, procedural_receipt, BackgroundKind};

use rand::distributions::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{expand_corner_box, homography_from_quads, warp, CornerLabel, CornerSet, Homography, Point2, SquareBox};
use crate::imagecore::{round_u8, RasterImage};

/// Random geometric augmentation ranges, each `(low, high)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationConfig {
    /// Per-axis scale factor about the canvas center.
    pub scale_range: (f64, f64),
    /// Per-axis shift as a fraction of the canvas size.
    pub translate_range: (f64, f64),
    /// Rotation about the canvas center.
    pub rotate_range_degrees: (f64, f64),
    /// Maximum corner displacement as a fraction of the shorter canvas side.
    pub projective_scale_range: (f64, f64),
    pub variants_per_scene: usize,
    pub max_retries: usize,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        AugmentationConfig {
            scale_range: (0.5, 1.0),
            translate_range: (-0.3, 0.3),
            rotate_range_degrees: (-70.0, 70.0),
            projective_scale_range: (0.0, 0.15),
            variants_per_scene: 2,
            max_retries: 100,
        }
    }
}

fn check_range(name: &'static str, r: (f64, f64), bounds: (f64, f64)) -> Result<()> {
    if !(r.0.is_finite() && r.1.is_finite()) || r.0 > r.1 || r.0 < bounds.0 || r.1 > bounds.1 {
        return Err(Error::param(
            name,
            format!("({}, {}) must be ordered and within [{}, {}]", r.0, r.1, bounds.0, bounds.1),
        ));
    }
    Ok(())
}

impl AugmentationConfig {
    /// No geometric change at all.
    pub fn identity() -> Self {
        AugmentationConfig {
            scale_range: (1.0, 1.0),
            translate_range: (0.0, 0.0),
            rotate_range_degrees: (0.0, 0.0),
            projective_scale_range: (0.0, 0.0),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("scale_range", self.scale_range, (0.5, 1.0))?;
        check_range("translate_range", self.translate_range, (-0.3, 0.3))?;
        check_range("rotate_range_degrees", self.rotate_range_degrees, (-70.0, 70.0))?;
        check_range("projective_scale_range", self.projective_scale_range, (0.0, 0.15))?;
        if self.max_retries == 0 {
            return Err(Error::param("max_retries", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub canvas_width: usize,
    pub canvas_height: usize,
    /// Fraction of the canvas height left free above and below the target.
    pub target_margin_fraction: f64,
    pub max_interferers: usize,
    pub corner_box_side: f64,
    /// Placement attempts per interferer before it is dropped.
    pub max_retries: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        SceneConfig {
            canvas_width: 1080,
            canvas_height: 1920,
            target_margin_fraction: 0.30,
            max_interferers: 2,
            corner_box_side: 10.0,
            max_retries: 100,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.canvas_width < 2 || self.canvas_height < 2 {
            return Err(Error::param("canvas_size", "both sides must be at least 2"));
        }
        let m = self.target_margin_fraction;
        if !(m > 0.0 && m < 0.5) {
            return Err(Error::param("target_margin_fraction", format!("{m} not in (0, 0.5)")));
        }
        if !(self.corner_box_side.is_finite() && self.corner_box_side > 0.0) {
            return Err(Error::param("corner_box_side", "must be positive"));
        }
        if self.max_retries == 0 {
            return Err(Error::param("max_retries", "must be at least 1"));
        }
        Ok(())
    }
}

/// Where the target receipt lands on the canvas, in whole pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Placement {
    pub x0: usize,
    pub y0: usize,
    pub width: usize,
    pub height: usize,
}

impl Placement {
    /// Pixel centers of the four outermost target pixels.
    pub fn corners(&self) -> CornerSet {
        let (x0, y0) = (self.x0 as f64, self.y0 as f64);
        let (x1, y1) = (x0 + (self.width - 1) as f64, y0 + (self.height - 1) as f64);
        CornerSet::new(Point2::new(x0, y0), Point2::new(x1, y0), Point2::new(x1, y1), Point2::new(x0, y1))
    }
}

fn round_half_up(v: f64) -> usize {
    (v + 0.5).floor().max(0.0) as usize
}

/// Size and centered position of a `target_w x target_h` receipt on the canvas.
pub fn target_placement(cfg: &SceneConfig, target_w: usize, target_h: usize) -> Result<Placement> {
    if target_w == 0 || target_h == 0 {
        return Err(Error::param("target", "empty image"));
    }
    if target_h < target_w {
        return Err(Error::Composition(format!("target {target_w}x{target_h} is not portrait")));
    }
    let height = round_half_up((1.0 - 2.0 * cfg.target_margin_fraction) * cfg.canvas_height as f64).max(2);
    let width = round_half_up(height as f64 * target_w as f64 / target_h as f64).max(2);
    if width > cfg.canvas_width {
        return Err(Error::Composition(format!(
            "scaled target width {width} exceeds canvas width {}",
            cfg.canvas_width
        )));
    }
    Ok(Placement {
        x0: round_half_up((cfg.canvas_width - width) as f64 / 2.0),
        y0: round_half_up((cfg.canvas_height - height) as f64 / 2.0),
        width,
        height,
    })
}

/// Pose of an unannotated receipt drawn under the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterfererPose {
    pub receipt: String,
    pub center: Point2,
    pub rotation_degrees: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub receipt: String,
    pub background: String,
    pub interferers: Vec<InterfererPose>,
    /// Augmentation homography, row-major; identity for the rectilinear scene.
    #[serde(rename = "H")]
    pub homography: [f64; 9],
    pub seed: u64,
    pub index: usize,
    /// 0 for the rectilinear scene, `1..` for augmented versions.
    pub variant: usize,
}

/// A composed scene with its target annotation.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSample {
    pub image: RasterImage,
    pub corners: CornerSet,
    /// Corner boxes: fixed-side squares until [`SyntheticSample::expand_boxes`].
    pub boxes: [SquareBox; 4],
    /// The fixed-side boxes carried through augmentation as the axis-aligned
    /// hull of their transformed outline, `[xmin, ymin, xmax, ymax]`.
    pub raw_boxes: [[f64; 4]; 4],
    pub provenance: Provenance,
}

impl SyntheticSample {
    /// Replaces every box by the largest in-bounds square centered on its corner.
    pub fn expand_boxes(&mut self) {
        let (w, h) = (self.image.width(), self.image.height());
        self.boxes = CornerLabel::ALL.map(|l| expand_corner_box(self.corners.get(l), l, w, h));
    }
}

fn fixed_boxes(corners: &CornerSet, side: f64) -> [SquareBox; 4] {
    CornerLabel::ALL.map(|l| SquareBox::centered(l, corners.get(l), side / 2.0))
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, r: (f64, f64)) -> f64 {
    if r.0 == r.1 {
        r.0
    } else {
        Uniform::new_inclusive(r.0, r.1).sample(rng)
    }
}

/// Composes one rectilinear scene: interferers first, then the target centered on top.
///
/// The background is resized to the canvas if needed. Interferers that cannot be
/// placed fully inside the canvas within `cfg.max_retries` draws are dropped.
pub fn compose_scene<R: Rng + ?Sized>(
    target: &NamedImage,
    interferers: &[&NamedImage],
    background: &NamedImage,
    cfg: &SceneConfig,
    rng: &mut R,
) -> Result<SyntheticSample> {
    cfg.validate()?;
    let (cw, ch) = (cfg.canvas_width, cfg.canvas_height);
    let placement = target_placement(cfg, target.image.width(), target.image.height())?;
    let mut canvas = if background.image.width() == cw && background.image.height() == ch {
        background.image.to_rgb()
    } else {
        background.image.to_rgb().resize(cw, ch)?
    };
    let base_scale = placement.height as f64 / target.image.height() as f64;

    let mut poses = Vec::new();
    for inter in interferers {
        let src = &inter.image;
        let (iw, ih) = ((src.width() - 1) as f64, (src.height() - 1) as f64);
        for _ in 0..cfg.max_retries {
            let rotation: f64 = rng.gen_range(0.0..360.0);
            let scale = base_scale * rng.gen_range(0.8..=1.2);
            let (s, c) = rotation.to_radians().sin_cos();
            let ex = (c.abs() * iw + s.abs() * ih) * scale / 2.0;
            let ey = (s.abs() * iw + c.abs() * ih) * scale / 2.0;
            let (maxx, maxy) = ((cw - 1) as f64 - ex, (ch - 1) as f64 - ey);
            if ex > maxx || ey > maxy {
                continue;
            }
            let center = Point2::new(uniform(rng, (ex, maxx)), uniform(rng, (ey, maxy)));
            draw_rotated(&mut canvas, &src.to_rgb(), center, rotation, scale)?;
            poses.push(InterfererPose {
                receipt: inter.id.clone(),
                center,
                rotation_degrees: rotation,
                scale,
            });
            break;
        }
        if poses.last().map(|p| &p.receipt) != Some(&inter.id) {
            log::warn!("dropping interferer {} after {} placement attempts", inter.id, cfg.max_retries);
        }
    }

    let scaled = target.image.to_rgb().resize(placement.width, placement.height)?;
    for y in 0..placement.height {
        let dst = (placement.y0 + y) * cw * 3 + placement.x0 * 3;
        canvas.data_mut()[dst..dst + placement.width * 3].copy_from_slice(scaled.row(y));
    }

    let corners = placement.corners();
    let boxes = fixed_boxes(&corners, cfg.corner_box_side);
    Ok(SyntheticSample {
        image: canvas,
        corners,
        raw_boxes: boxes.map(|b| b.bounds()),
        boxes,
        provenance: Provenance {
            receipt: target.id.clone(),
            background: background.id.clone(),
            interferers: poses,
            homography: Homography::IDENTITY.to_row_major(),
            seed: 0,
            index: 0,
            variant: 0,
        },
    })
}

/// Paints `src`, scaled and rotated about its center, centered at `center`.
fn draw_rotated(canvas: &mut RasterImage, src: &RasterImage, center: Point2, degrees: f64, scale: f64) -> Result<()> {
    let (iw, ih) = ((src.width() - 1) as f64, (src.height() - 1) as f64);
    let origin = Point2::new(0.0, 0.0);
    let forward = Homography::translation(-iw / 2.0, -ih / 2.0)
        .then(&Homography::scaling_about(scale, scale, origin))?
        .then(&Homography::rotation_about(degrees, origin))?
        .then(&Homography::translation(center.x, center.y))?;
    let inv = forward.inverse()?;
    let outline = [(0.0, 0.0), (iw, 0.0), (iw, ih), (0.0, ih)].map(|(x, y)| forward.apply(Point2::new(x, y)));
    let mut lo = Point2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in outline {
        let p = p?;
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let (cw, ch) = (canvas.width(), canvas.height());
    let x0 = lo.x.floor().max(0.0) as usize;
    let y0 = lo.y.floor().max(0.0) as usize;
    let x1 = (hi.x.ceil().max(0.0) as usize).min(cw - 1);
    let y1 = (hi.y.ceil().max(0.0) as usize).min(ch - 1);
    let mut acc = [0.0; 3];
    for y in y0..=y1 {
        for x in x0..=x1 {
            let s = inv.apply(Point2::new(x as f64, y as f64))?;
            if s.x < 0.0 || s.y < 0.0 || s.x > iw || s.y > ih {
                continue;
            }
            src.bilinear_into(s.x, s.y, &mut acc);
            canvas.set_pixel(x, y, &acc.map(round_u8));
        }
    }
    Ok(())
}

/// Draws one augmentation: scaling, then translation, then rotation, then a
/// projective pull of the canvas corners toward the interior.
pub fn sample_augmentation<R: Rng + ?Sized>(
    rng: &mut R,
    cfg: &AugmentationConfig,
    canvas_w: usize,
    canvas_h: usize,
) -> Result<Homography> {
    cfg.validate()?;
    let (w, h) = ((canvas_w - 1) as f64, (canvas_h - 1) as f64);
    let center = Point2::new(w / 2.0, h / 2.0);
    let sx = uniform(rng, cfg.scale_range);
    let sy = uniform(rng, cfg.scale_range);
    let tx = uniform(rng, cfg.translate_range) * canvas_w as f64;
    let ty = uniform(rng, cfg.translate_range) * canvas_h as f64;
    let angle = uniform(rng, cfg.rotate_range_degrees);
    let affine = Homography::scaling_about(sx, sy, center)
        .then(&Homography::translation(tx, ty))?
        .then(&Homography::rotation_about(angle, center))?;

    let canvas = CornerSet::new(Point2::new(0.0, 0.0), Point2::new(w, 0.0), Point2::new(w, h), Point2::new(0.0, h));
    for _ in 0..cfg.max_retries {
        let s = uniform(rng, cfg.projective_scale_range);
        let reach = s * canvas_w.min(canvas_h) as f64;
        if reach == 0.0 {
            return Ok(affine);
        }
        let mut d = || rng.gen_range(0.0..=reach);
        let moved = CornerSet::new(
            Point2::new(d(), d()),
            Point2::new(w - d(), d()),
            Point2::new(w - d(), h - d()),
            Point2::new(d(), h - d()),
        );
        if let Ok(p) = homography_from_quads(&canvas, &moved) {
            return affine.then(&p);
        }
    }
    Err(Error::Degenerate("no usable projective component".into()))
}

fn strictly_inside(c: &CornerSet, w: usize, h: usize) -> bool {
    let (maxx, maxy) = ((w - 1) as f64, (h - 1) as f64);
    c.to_array().iter().all(|p| p.x > 0.0 && p.y > 0.0 && p.x < maxx && p.y < maxy)
}

/// Warps a sample by `h`. Returns `None` when a mapped target corner would not
/// be strictly inside the canvas, so the caller can draw another `h`.
pub fn augment_sample(s: &SyntheticSample, h: &Homography) -> Result<Option<SyntheticSample>> {
    let (w, hh) = (s.image.width(), s.image.height());
    let mut mapped = [Point2::default(); 4];
    for (slot, p) in mapped.iter_mut().zip(s.corners.to_array()) {
        match h.apply(p) {
            Ok(q) => *slot = q,
            Err(Error::PointAtInfinity { .. }) => return Ok(None),
            Err(e) => return Err(e),
        }
    }
    let corners = CornerSet::from_array(mapped);
    if !strictly_inside(&corners, w, hh) || !corners.is_valid() {
        return Ok(None);
    }
    let mut raw_boxes = [[0.0; 4]; 4];
    for (out, b) in raw_boxes.iter_mut().zip(&s.raw_boxes) {
        let mut hull = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for (x, y) in [(b[0], b[1]), (b[2], b[1]), (b[2], b[3]), (b[0], b[3])] {
            let q = h.apply(Point2::new(x, y))?;
            hull = [hull[0].min(q.x), hull[1].min(q.y), hull[2].max(q.x), hull[3].max(q.y)];
        }
        *out = hull;
    }
    let side = 2.0 * s.boxes[0].half_side;
    let mut provenance = s.provenance.clone();
    let prior = Homography::from_row_major(provenance.homography)?;
    provenance.homography = prior.then(h)?.to_row_major();
    Ok(Some(SyntheticSample {
        image: warp(&s.image, h, w, hh)?,
        boxes: fixed_boxes(&corners, side),
        corners,
        raw_boxes,
        provenance,
    }))
}

/// Draws augmentations until one keeps the target in view, or gives up after
/// `cfg.max_retries` attempts.
pub fn augment_with_retries<R: Rng + ?Sized>(
    s: &SyntheticSample,
    cfg: &AugmentationConfig,
    rng: &mut R,
) -> Result<Option<SyntheticSample>> {
    for _ in 0..cfg.max_retries {
        let h = sample_augmentation(rng, cfg, s.image.width(), s.image.height())?;
        if let Some(out) = augment_sample(s, &h)? {
            return Ok(Some(out));
        }
    }
    Ok(None)
}
