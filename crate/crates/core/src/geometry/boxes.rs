use super::types::{CornerLabel, Point2};

/// Square, axis-aligned box stored as center and half-side, so it is square
/// and centered by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareBox {
    pub label: CornerLabel,
    pub center: Point2,
    pub half_side: f64,
}

impl SquareBox {
    pub fn centered(label: CornerLabel, center: Point2, half_side: f64) -> Self {
        SquareBox {
            label,
            center,
            half_side,
        }
    }

    pub fn xmin(&self) -> f64 {
        self.center.x - self.half_side
    }

    pub fn ymin(&self) -> f64 {
        self.center.y - self.half_side
    }

    pub fn xmax(&self) -> f64 {
        self.center.x + self.half_side
    }

    pub fn ymax(&self) -> f64 {
        self.center.y + self.half_side
    }

    /// `[xmin, ymin, xmax, ymax]`.
    pub fn bounds(&self) -> [f64; 4] {
        [self.xmin(), self.ymin(), self.xmax(), self.ymax()]
    }

    /// Zero-size boxes come from corners on or outside the image border.
    pub fn is_degenerate(&self) -> bool {
        self.half_side <= 0.0
    }

    /// Exact containment test on the center and half-side.
    pub fn inside(&self, width: usize, height: usize) -> bool {
        let (c, s) = (self.center, self.half_side);
        s >= 0.0
            && s <= c.x
            && s <= c.y
            && s <= (width - 1) as f64 - c.x
            && s <= (height - 1) as f64 - c.y
    }

    /// Integer box covering this one, `[floor(min), ceil(max)]` on each axis,
    /// clipped to a `width x height` image.
    pub fn rounded_outward(&self, width: usize, height: usize) -> [i64; 4] {
        let (mx, my) = (width as i64 - 1, height as i64 - 1);
        [
            (self.xmin().floor() as i64).clamp(0, mx),
            (self.ymin().floor() as i64).clamp(0, my),
            (self.xmax().ceil() as i64).clamp(0, mx),
            (self.ymax().ceil() as i64).clamp(0, my),
        ]
    }
}

/// Largest square box centered on `corner` that stays inside a
/// `img_w x img_h` image: half-side is the distance to the nearest edge.
/// Corners on or outside the border give a zero-size box at the clamped position.
pub fn expand_corner_box(corner: Point2, label: CornerLabel, img_w: usize, img_h: usize) -> SquareBox {
    let (maxx, maxy) = ((img_w - 1) as f64, (img_h - 1) as f64);
    let s = corner.x.min(corner.y).min(maxx - corner.x).min(maxy - corner.y);
    if s > 0.0 && corner.is_finite() {
        SquareBox::centered(label, corner, s)
    } else {
        let c = Point2::new(
            if corner.x.is_finite() { corner.x.clamp(0.0, maxx) } else { 0.0 },
            if corner.y.is_finite() { corner.y.clamp(0.0, maxy) } else { 0.0 },
        );
        SquareBox::centered(label, c, 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn left_edge_limited() {
        let b = expand_corner_box(Point2::new(100.0, 500.0), CornerLabel::Tl, 1080, 1920);
        assert_eq!(b.bounds(), [0.0, 400.0, 200.0, 600.0]);
    }

    #[test]
    fn right_edge_limited() {
        let b = expand_corner_box(Point2::new(1000.0, 500.0), CornerLabel::Tr, 1080, 1920);
        assert_eq!(b.half_side, 79.0);
        assert_eq!(b.bounds(), [921.0, 421.0, 1079.0, 579.0]);
    }

    #[test]
    fn image_center_spans_the_frame() {
        let b = expand_corner_box(Point2::new(149.5, 149.5), CornerLabel::Br, 300, 300);
        assert_eq!(b.half_side, 149.5);
        assert_eq!(b.rounded_outward(300, 300), [0, 0, 299, 299]);
    }

    #[test]
    fn border_corner_is_degenerate() {
        let b = expand_corner_box(Point2::new(0.0, 10.0), CornerLabel::Bl, 50, 50);
        assert!(b.is_degenerate());
        let b = expand_corner_box(Point2::new(-3.0, 80.0), CornerLabel::Bl, 50, 50);
        assert!(b.is_degenerate());
        assert!(b.inside(50, 50));
    }

    proptest! {
        #[test]
        fn boxes_are_square_inside_and_centered(
            w in 2usize..4000, h in 2usize..4000, fx in 0.0f64..1.0, fy in 0.0f64..1.0,
        ) {
            let c = Point2::new(fx * (w - 1) as f64, fy * (h - 1) as f64);
            let b = expand_corner_box(c, CornerLabel::Tl, w, h);
            prop_assert!(b.inside(w, h));
            if !b.is_degenerate() {
                prop_assert_eq!(b.center, c);
                let [x0, y0, x1, y1] = b.rounded_outward(w, h);
                prop_assert!(x0 as f64 <= b.xmin() && y0 as f64 <= b.ymin());
                prop_assert!(x1 as f64 >= b.xmax().min((w - 1) as f64));
                prop_assert!(y1 as f64 >= b.ymax().min((h - 1) as f64));
            }
        }
    }
}
