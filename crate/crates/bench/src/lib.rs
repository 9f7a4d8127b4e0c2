//! Shared inputs for the pipeline benchmarks.

use receipt_core::geometry::Homography;
use receipt_core::{Point2, RasterImage};

/// A bright tilted quadrilateral on black, like a receipt photographed from above.
pub fn tilted_receipt(width: usize, height: usize) -> RasterImage {
    let rot = Homography::rotation_about(12.0, Point2::new(width as f64 / 2.0, height as f64 / 2.0));
    let inv = rot.inverse().expect("rotation is invertible");
    let (w, h) = (width as f64, height as f64);
    RasterImage::from_fn_gray(width, height, |x, y| {
        let p = inv.apply(Point2::new(x as f64, y as f64)).expect("affine");
        let inside = p.x > 0.3 * w && p.x < 0.7 * w && p.y > 0.2 * h && p.y < 0.8 * h;
        if inside { 245 } else { 15 }
    })
    .to_rgb()
}
