//! Asset-free receipts and backgrounds for demos and tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::imagecore::{gaussian_blur, RasterImage};

use super::NamedImage;

/// A white slip with dark text-like blocks, lightly blurred.
pub fn procedural_receipt<R: Rng + ?Sized>(rng: &mut R, width: usize, height: usize) -> RasterImage {
    let paper: u8 = rng.gen_range(246..=255);
    let mut img = RasterImage::rgb(width, height, [paper; 3]);
    let margin = (width as f64 * rng.gen_range(0.06..0.12)) as usize;
    let mut y = (height as f64 * rng.gen_range(0.03..0.06)) as usize;
    while y + 30 < height.saturating_sub(margin) {
        let line_h = rng.gen_range(12..=22);
        if rng.gen_bool(0.15) {
            // Blank line between sections.
            y += line_h + rng.gen_range(8..20);
            continue;
        }
        let ink: u8 = rng.gen_range(20..=90);
        let centered = rng.gen_bool(0.2);
        let mut x = if centered { width / 2 - rng.gen_range(0..=width / 4) } else { margin };
        let stop = if centered { width - x } else { width - margin };
        while x + 8 < stop {
            let word = rng.gen_range(10..=60).min(stop - x);
            for yy in y..(y + line_h).min(height) {
                for xx in x..x + word {
                    img.set_pixel(xx, yy, &[ink; 3]);
                }
            }
            x += word + rng.gen_range(8..=18);
        }
        y += line_h + rng.gen_range(8..=16);
    }
    gaussian_blur(&img, 3).expect("kernel 3 is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackgroundKind {
    /// Uniform black.
    Black,
    /// Colored surface with low-frequency texture.
    Textured,
    /// Smooth surface a few levels darker than white paper.
    NearWhite,
}

pub fn procedural_background<R: Rng + ?Sized>(rng: &mut R, kind: BackgroundKind, width: usize, height: usize) -> RasterImage {
    match kind {
        BackgroundKind::Black => RasterImage::rgb(width, height, [0, 0, 0]),
        BackgroundKind::Textured => {
            let base: [f64; 3] = [rng.gen_range(40.0..180.0), rng.gen_range(40.0..180.0), rng.gen_range(40.0..180.0)];
            let (fx, fy) = (rng.gen_range(0.005..0.03), rng.gen_range(0.002..0.02));
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let amp = rng.gen_range(10.0..35.0);
            let mut img = RasterImage::rgb(width, height, [0, 0, 0]);
            for y in 0..height {
                for x in 0..width {
                    let t = ((x as f64 * fx + y as f64 * fy) + phase).sin() * amp
                        + ((y as f64 * fx * 0.7) - phase).cos() * amp * 0.5;
                    img.set_pixel(x, y, &base.map(|b| (b + t).clamp(0.0, 255.0) as u8));
                }
            }
            img
        }
        BackgroundKind::NearWhite => {
            let base = rng.gen_range(246.0..250.0);
            let phase = rng.gen_range(0.0..std::f64::consts::TAU);
            let mut img = RasterImage::rgb(width, height, [0, 0, 0]);
            for y in 0..height {
                let v = (base + 2.0 * (y as f64 / height as f64 * 3.0 + phase).sin()).round() as u8;
                for x in 0..width {
                    img.set_pixel(x, y, &[v, v, v.saturating_sub(1)]);
                }
            }
            img
        }
    }
}

/// `n_receipts` portrait receipts and `n_backgrounds` backgrounds cycling
/// through `kinds`, all derived from `seed`.
pub fn procedural_corpus(
    seed: u64,
    n_receipts: usize,
    n_backgrounds: usize,
    kinds: &[BackgroundKind],
    background_size: (usize, usize),
) -> (Vec<NamedImage>, Vec<NamedImage>) {
    let receipts = (0..n_receipts)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2 * i as u64);
            let w = rng.gen_range(300..=420);
            let h = rng.gen_range(2 * w..=3 * w);
            NamedImage {
                id: format!("receipt_{i:04}"),
                image: procedural_receipt(&mut rng, w, h),
            }
        })
        .collect();
    let backgrounds = (0..n_backgrounds)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(2 * i as u64 + 1);
            let kind = kinds[i % kinds.len()];
            NamedImage {
                id: format!("background_{i:04}"),
                image: procedural_background(&mut rng, kind, background_size.0, background_size.1),
            }
        })
        .collect();
    (receipts, backgrounds)
}
