//! Classical corner detector: grayscale, blur, Canny, contours, largest
//! polygon, Douglas-Peucker, and a four-vertex check.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{order_corners, CornerSet, Point2};
use crate::imagecore::{
    approx_polygon, canny, find_contours, gaussian_blur, polygon_area, to_grayscale, validate_kernel,
    validate_threshold, BinaryMap, Contour, RasterImage,
};

pub const EPSILON_RANGE: (f64, f64) = (0.01, 0.1);

/// Tunables of the baseline detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub gaussian_kernel: usize,
    pub canny_t1: f64,
    pub canny_t2: f64,
    pub epsilon_fraction: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        default_params()
    }
}

impl BaselineParams {
    pub fn new(gaussian_kernel: usize, canny_t1: f64, canny_t2: f64, epsilon_fraction: f64) -> Result<Self> {
        let p = BaselineParams {
            gaussian_kernel,
            canny_t1,
            canny_t2,
            epsilon_fraction,
        };
        p.validate()?;
        Ok(p)
    }

    /// Values found by exhaustive search on held-out real receipts.
    pub fn tuned() -> Self {
        BaselineParams {
            gaussian_kernel: 5,
            canny_t1: 50.0,
            canny_t2: 0.0,
            epsilon_fraction: 0.06,
        }
    }

    pub fn validate(&self) -> Result<()> {
        validate_kernel(self.gaussian_kernel)?;
        validate_threshold("canny_t1", self.canny_t1)?;
        validate_threshold("canny_t2", self.canny_t2)?;
        // Small slack so grid values like 0.01 * 7 pass.
        let (lo, hi) = EPSILON_RANGE;
        if !(lo - 1e-9..=hi + 1e-9).contains(&self.epsilon_fraction) {
            return Err(Error::param(
                "epsilon_fraction",
                format!("{} (expected {lo}..={hi})", self.epsilon_fraction),
            ));
        }
        Ok(())
    }
}

/// Settings of the widely used public document-scanner implementation.
pub fn default_params() -> BaselineParams {
    BaselineParams {
        gaussian_kernel: 5,
        canny_t1: 75.0,
        canny_t2: 200.0,
        epsilon_fraction: 0.02,
    }
}

/// Runs the detector. `None` means no four-vertex polygon was found.
pub fn detect_baseline(img: &RasterImage, p: &BaselineParams) -> Result<Option<CornerSet>> {
    p.validate()?;
    let gray = to_grayscale(img);
    let blurred = gaussian_blur(&gray, p.gaussian_kernel)?;
    let edges = canny(&blurred, p.canny_t1, p.canny_t2)?;
    Ok(corners_from_edges(&edges, p.epsilon_fraction))
}

/// Contour with the largest shoelace area; earliest wins ties.
pub fn largest_contour(edges: &BinaryMap) -> Option<Contour> {
    let mut best: Option<(f64, Contour)> = None;
    for c in find_contours(edges) {
        let a = polygon_area(&c);
        if best.as_ref().is_none_or(|(b, _)| a > *b) {
            best = Some((a, c));
        }
    }
    best.map(|(_, c)| c)
}

/// The contour-to-corners tail of the pipeline.
pub fn corners_from_edges(edges: &BinaryMap, epsilon_fraction: f64) -> Option<CornerSet> {
    largest_contour(edges).and_then(|c| corners_from_contour(&c, epsilon_fraction))
}

pub fn corners_from_contour(contour: &Contour, epsilon_fraction: f64) -> Option<CornerSet> {
    let poly = approx_polygon(contour, epsilon_fraction);
    if poly.len() != 4 {
        return None;
    }
    let pts: [Point2; 4] = std::array::from_fn(|i| {
        let (x, y) = poly.points[i];
        Point2::new(x as f64, y as f64)
    });
    order_corners(pts).ok()
}
