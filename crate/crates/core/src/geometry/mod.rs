//! Projective geometry for four-corner receipts: corner roles, homographies,
//! warping, rectification and square corner boxes.

mod boxes;
mod homography;
mod types;
mod warp;

pub use boxes::{expand_corner_box, SquareBox};
pub use homography::{apply_homography, homography_from_quads, Homography, DET_EPS};
pub use types::{order_corners, CornerLabel, CornerSet, Point2};
pub use warp::{dest_rectangle, rectify, warp};
