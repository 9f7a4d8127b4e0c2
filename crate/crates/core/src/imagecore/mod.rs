//! Raster images and the low-level operators of the classical pipeline:
//! grayscale, Gaussian blur, Canny, border following and polygon simplification.

mod canny;
mod contour;
mod filter;
mod polygon;
mod raster;

pub use canny::{canny, sobel, BinaryMap, GradientDirection, MAX_THRESHOLD};
pub use contour::{find_contours, Contour};
pub use filter::{gaussian_blur, gaussian_weights, sigma_for_kernel, to_grayscale, MAX_KERNEL};
pub use polygon::{approx_polygon, closed_perimeter, polygon_area};
pub use raster::RasterImage;

pub(crate) use canny::validate_threshold;
pub(crate) use filter::validate_kernel;
pub(crate) use raster::round_u8;
