//! Receipt corner detection and rectification.
//!
//! The crate is organized as a pipeline of small modules:
//!
//! 1. [`imagecore`] – rasters, grayscale, Gaussian blur, Canny, border following, RDP.
//! 2. [`geometry`] – corner roles, four-point homographies, warping, rectification, corner boxes.
//! 3. [`baseline`] – the classical edge/contour corner detector.
//! 4. [`synthgen`] – synthetic scene composition and projective augmentation with exact corner tracking.
//! 5. [`detections`] – detector-agnostic predictions and their reduction to corners.
//! 6. [`evaluation`] – corner/receipt accuracy over distance thresholds and the grid-search tuner.

pub mod baseline;
pub mod detections;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod imagecore;
pub mod io;
pub mod synthgen;

pub use baseline::{detect_baseline, BaselineParams};
pub use evaluation::{corner_error, evaluate, EvalReport, GroundTruth};
pub use synthgen::{AugmentationConfig, SceneConfig, SyntheticSample};
pub use detections::{corners_from_detections, parse_predictions, Detection, DetectionRecord};

pub use error::{Error, Result};

pub use geometry::{
    apply_homography, homography_from_quads, order_corners, rectify, CornerLabel, CornerSet, Homography, Point2,
    SquareBox,
};
pub use imagecore::{BinaryMap, Contour, RasterImage};

