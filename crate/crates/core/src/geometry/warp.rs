use crate::error::{Error, Result};
use crate::imagecore::{round_u8, RasterImage};

use super::homography::{homography_from_quads, Homography};
use super::types::{CornerSet, Point2};

/// Output size for rectifying `q`: the longer of each pair of opposite edges,
/// rounded, and at least 1.
pub fn dest_rectangle(q: &CornerSet) -> (usize, usize) {
    let width = q.tr.distance(q.tl).max(q.br.distance(q.bl));
    let height = q.bl.distance(q.tl).max(q.br.distance(q.tr));
    let r = |v: f64| ((v + 0.5).floor() as usize).max(1);
    (r(width), r(height))
}

/// Resamples `img` through the forward map `h` into an `out_w x out_h` image.
///
/// Each output pixel pulls from `h^-1(x, y)` with bilinear interpolation;
/// positions outside the source clamp to the nearest edge pixel.
pub fn warp(img: &RasterImage, h: &Homography, out_w: usize, out_h: usize) -> Result<RasterImage> {
    let inv = h.inverse()?;
    let m = *inv.matrix();
    let c = img.channels();
    let mut out = RasterImage::from_raw(out_w, out_h, c, vec![0; out_w * out_h * c])?;
    let mut acc = [0.0f64; 3];
    let data = out.data_mut();
    for y in 0..out_h {
        let yf = y as f64;
        // Row-constant parts of the projective map.
        let (bx, by, bw) = (
            m[0][1] * yf + m[0][2],
            m[1][1] * yf + m[1][2],
            m[2][1] * yf + m[2][2],
        );
        let row = &mut data[y * out_w * c..(y + 1) * out_w * c];
        for x in 0..out_w {
            let xf = x as f64;
            let w = m[2][0] * xf + bw;
            let (sx, sy) = if w.abs() > 1e-12 {
                ((m[0][0] * xf + bx) / w, (m[1][0] * xf + by) / w)
            } else {
                (f64::NAN, f64::NAN)
            };
            img.bilinear_into(sx, sy, &mut acc[..c]);
            for k in 0..c {
                row[x * c + k] = round_u8(acc[k]);
            }
        }
    }
    Ok(out)
}

/// Four-point rectification to a bird's-eye view of the quadrilateral.
pub fn rectify(img: &RasterImage, corners: &CornerSet) -> Result<RasterImage> {
    if !corners.inside(img.width(), img.height()) {
        return Err(Error::param(
            "corners",
            format!(
                "{corners:?} outside {}x{} image",
                img.width(),
                img.height()
            ),
        ));
    }
    let (w, h) = dest_rectangle(corners);
    let (wf, hf) = ((w - 1) as f64, (h - 1) as f64);
    let dst = CornerSet::new(
        Point2::new(0.0, 0.0),
        Point2::new(wf, 0.0),
        Point2::new(wf, hf),
        Point2::new(0.0, hf),
    );
    let hom = homography_from_quads(corners, &dst)?;
    warp(img, &hom, w, h)
}
