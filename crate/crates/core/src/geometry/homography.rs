use crate::error::{Error, Result};

use super::types::{CornerSet, Point2};

/// Smallest |det| accepted for a homography matrix.
pub const DET_EPS: f64 = 1e-12;
const W_EPS: f64 = 1e-12;

/// 3x3 projective transform, normalized so that `m[2][2] == 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography {
    m: [[f64; 3]; 3],
}

impl Homography {
    pub const IDENTITY: Homography = Homography {
        m: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
    };

    /// Normalizes by `m[2][2]` and checks invertibility.
    pub fn from_matrix(m: [[f64; 3]; 3]) -> Result<Self> {
        if !m.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::Degenerate("non-finite homography entry".into()));
        }
        let s = m[2][2];
        if s.abs() < DET_EPS {
            return Err(Error::Degenerate("homography has m[2][2] = 0".into()));
        }
        let m = m.map(|row| row.map(|v| v / s));
        let h = Homography { m };
        if h.determinant().abs() <= DET_EPS {
            return Err(Error::Degenerate(format!("singular homography (det {:e})", h.determinant())));
        }
        Ok(h)
    }

    pub fn from_row_major(v: [f64; 9]) -> Result<Self> {
        Self::from_matrix([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]])
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        Homography {
            m: [[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]],
        }
    }

    /// Scaling by `(sx, sy)` about `center`.
    pub fn scaling_about(sx: f64, sy: f64, center: Point2) -> Self {
        Homography {
            m: [
                [sx, 0.0, center.x * (1.0 - sx)],
                [0.0, sy, center.y * (1.0 - sy)],
                [0.0, 0.0, 1.0],
            ],
        }
    }

    /// Rotation by `degrees` about `center`, using the matrix `[[c, -s], [s, c]]`
    /// in image coordinates (clockwise on screen for positive angles).
    pub fn rotation_about(degrees: f64, center: Point2) -> Self {
        let (s, c) = degrees.to_radians().sin_cos();
        Homography {
            m: [
                [c, -s, center.x - c * center.x + s * center.y],
                [s, c, center.y - s * center.x - c * center.y],
                [0.0, 0.0, 1.0],
            ],
        }
    }

    pub fn matrix(&self) -> &[[f64; 3]; 3] {
        &self.m
    }

    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.m;
        [m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2]]
    }

    pub fn determinant(&self) -> f64 {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Maps a point; fails when the homogeneous denominator vanishes.
    pub fn apply(&self, p: Point2) -> Result<Point2> {
        let m = &self.m;
        let w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
        if w.abs() <= W_EPS {
            return Err(Error::PointAtInfinity { x: p.x, y: p.y });
        }
        Ok(Point2::new(
            (m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / w,
            (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / w,
        ))
    }

    pub fn inverse(&self) -> Result<Homography> {
        let m = &self.m;
        let det = self.determinant();
        if det.abs() <= DET_EPS {
            return Err(Error::Degenerate(format!("singular homography (det {det:e})")));
        }
        let adj = [
            [
                m[1][1] * m[2][2] - m[1][2] * m[2][1],
                m[0][2] * m[2][1] - m[0][1] * m[2][2],
                m[0][1] * m[1][2] - m[0][2] * m[1][1],
            ],
            [
                m[1][2] * m[2][0] - m[1][0] * m[2][2],
                m[0][0] * m[2][2] - m[0][2] * m[2][0],
                m[0][2] * m[1][0] - m[0][0] * m[1][2],
            ],
            [
                m[1][0] * m[2][1] - m[1][1] * m[2][0],
                m[0][1] * m[2][0] - m[0][0] * m[2][1],
                m[0][0] * m[1][1] - m[0][1] * m[1][0],
            ],
        ];
        Homography::from_matrix(adj.map(|r| r.map(|v| v / det)))
    }

    /// The transform that applies `self` first, then `next`.
    pub fn then(&self, next: &Homography) -> Result<Homography> {
        Homography::from_matrix(mat_mul(&next.m, &self.m))
    }

    /// Raw product `self * other` without normalization.
    pub fn product(&self, other: &Homography) -> [[f64; 3]; 3] {
        mat_mul(&self.m, &other.m)
    }
}

/// Free-function form of [`Homography::apply`].
pub fn apply_homography(h: &Homography, p: Point2) -> Result<Point2> {
    h.apply(p)
}

fn mat_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Similarity that moves the centroid to the origin and the mean distance to sqrt(2).
fn normalizing_transform(pts: &[Point2; 4]) -> [[f64; 3]; 3] {
    let cx = pts.iter().map(|p| p.x).sum::<f64>() / 4.0;
    let cy = pts.iter().map(|p| p.y).sum::<f64>() / 4.0;
    let mean = pts.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / 4.0;
    let s = if mean > 0.0 { std::f64::consts::SQRT_2 / mean } else { 1.0 };
    [[s, 0.0, -s * cx], [0.0, s, -s * cy], [0.0, 0.0, 1.0]]
}

fn has_collinear_triple(pts: &[Point2; 4]) -> bool {
    let scale = pts
        .iter()
        .flat_map(|a| pts.iter().map(move |b| a.distance(*b)))
        .fold(0.0, f64::max);
    if scale == 0.0 {
        return true;
    }
    let tol = 1e-10 * scale * scale;
    for (i, j, k) in [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)] {
        let (a, b, c) = (pts[i], pts[j], pts[k]);
        let cross = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
        if cross.abs() <= tol {
            return true;
        }
    }
    false
}

/// Solves `A x = b` for an 8x8 system by Gaussian elimination with partial pivoting.
fn solve8(mut a: [[f64; 8]; 8], mut b: [f64; 8]) -> Option<[f64; 8]> {
    for col in 0..8 {
        let pivot = (col..8).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..8 {
            let f = a[row][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            let pivot_row = a[col];
            for (dst, src) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 8];
    for row in (0..8).rev() {
        let s: f64 = (row + 1..8).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

/// Exact homography sending each `src` corner to the same-labeled `dst` corner.
///
/// Both point sets are first normalized (centroid at the origin, mean radius
/// sqrt(2)); the eight unknowns `h11..h32` with `h33 = 1` then come from an
/// 8x8 solve, and the normalization is undone.
pub fn homography_from_quads(src: &CornerSet, dst: &CornerSet) -> Result<Homography> {
    let s = src.to_array();
    let d = dst.to_array();
    if s.iter().chain(&d).any(|p| !p.is_finite()) {
        return Err(Error::Degenerate("non-finite corner".into()));
    }
    if has_collinear_triple(&s) {
        return Err(Error::Degenerate("three source corners are collinear".into()));
    }
    if has_collinear_triple(&d) {
        return Err(Error::Degenerate("three destination corners are collinear".into()));
    }
    let ts = normalizing_transform(&s);
    let td = normalizing_transform(&d);
    let norm = |t: &[[f64; 3]; 3], p: Point2| {
        Point2::new(t[0][0] * p.x + t[0][2], t[1][1] * p.y + t[1][2])
    };

    let mut a = [[0.0; 8]; 8];
    let mut b = [0.0; 8];
    for i in 0..4 {
        let p = norm(&ts, s[i]);
        let q = norm(&td, d[i]);
        a[2 * i] = [p.x, p.y, 1.0, 0.0, 0.0, 0.0, -p.x * q.x, -p.y * q.x];
        b[2 * i] = q.x;
        a[2 * i + 1] = [0.0, 0.0, 0.0, p.x, p.y, 1.0, -p.x * q.y, -p.y * q.y];
        b[2 * i + 1] = q.y;
    }
    let h = solve8(a, b).ok_or_else(|| Error::Degenerate("singular correspondence system".into()))?;
    let hn = [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], 1.0]];
    let td_inv = [
        [1.0 / td[0][0], 0.0, -td[0][2] / td[0][0]],
        [0.0, 1.0 / td[1][1], -td[1][2] / td[1][1]],
        [0.0, 0.0, 1.0],
    ];
    Homography::from_matrix(mat_mul(&td_inv, &mat_mul(&hn, &ts)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quad(p: [(f64, f64); 4]) -> CornerSet {
        CornerSet::from_array(p.map(Point2::from))
    }

    fn assert_close(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3], tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert!((a[i][j] - b[i][j]).abs() < tol, "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn same_quad_gives_identity() {
        let q = quad([(3., 4.), (50., 8.), (47., 90.), (1., 70.)]);
        let h = homography_from_quads(&q, &q).unwrap();
        assert_close(h.matrix(), Homography::IDENTITY.matrix(), 1e-12);
    }

    #[test]
    fn unit_square_doubled_is_diagonal_scaling() {
        let src = quad([(0., 0.), (1., 0.), (1., 1.), (0., 1.)]);
        let dst = quad([(0., 0.), (2., 0.), (2., 2.), (0., 2.)]);
        let h = homography_from_quads(&src, &dst).unwrap();
        assert_close(h.matrix(), &[[2., 0., 0.], [0., 2., 0.], [0., 0., 1.]], 1e-12);
    }

    #[test]
    fn collinear_corners_are_degenerate() {
        let src = quad([(0., 0.), (5., 0.), (10., 0.), (0., 10.)]);
        let dst = quad([(0., 0.), (1., 0.), (1., 1.), (0., 1.)]);
        assert!(matches!(homography_from_quads(&src, &dst), Err(Error::Degenerate(_))));
        assert!(matches!(homography_from_quads(&dst, &src), Err(Error::Degenerate(_))));
    }

    #[test]
    fn apply_examples() {
        let p = Point2::new(3.0, 4.0);
        assert_eq!(Homography::IDENTITY.apply(p).unwrap(), p);
        let s = Homography::from_matrix([[2., 0., 0.], [0., 2., 0.], [0., 0., 1.]]).unwrap();
        assert_eq!(s.apply(p).unwrap(), Point2::new(6.0, 8.0));
    }

    #[test]
    fn point_at_infinity() {
        let h = Homography::from_matrix([[1., 0., 0.], [0., 1., 0.], [1., 0., 1.]]).unwrap();
        assert!(matches!(h.apply(Point2::new(-1.0, 5.0)), Err(Error::PointAtInfinity { .. })));
    }

    #[test]
    fn singular_matrix_is_rejected() {
        assert!(Homography::from_matrix([[1., 2., 0.], [2., 4., 0.], [0., 0., 1.]]).is_err());
    }

    #[test]
    fn rotation_about_center_fixes_center() {
        let c = Point2::new(539.5, 959.5);
        let r = Homography::rotation_about(70.0, c);
        let q = r.apply(c).unwrap();
        assert!(q.distance(c) < 1e-9);
    }
    /// Direct linear transform through an SVD null vector, independent of the
    /// elimination solver.
    fn dlt_oracle(src: &CornerSet, dst: &CornerSet) -> [[f64; 3]; 3] {
        let mut rows = Vec::with_capacity(72);
        for (s, d) in src.to_array().iter().zip(dst.to_array()) {
            rows.extend([-s.x, -s.y, -1.0, 0.0, 0.0, 0.0, d.x * s.x, d.x * s.y, d.x]);
            rows.extend([0.0, 0.0, 0.0, -s.x, -s.y, -1.0, d.y * s.x, d.y * s.y, d.y]);
        }
        // Pad to 9x9 so the thin SVD exposes the null space.
        rows.extend([0.0; 9]);
        let a = nalgebra::DMatrix::from_row_slice(9, 9, &rows);
        let svd = a.svd(false, true);
        let vt = svd.v_t.unwrap();
        let k = (0..9)
            .min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]))
            .unwrap();
        let h: Vec<f64> = (0..9).map(|c| vt[(k, c)] / vt[(k, 8)]).collect();
        [[h[0], h[1], h[2]], [h[3], h[4], h[5]], [h[6], h[7], h[8]]]
    }

    proptest::proptest! {
        #[test]
        fn matches_svd_oracle(
            jitter in proptest::collection::vec(0.0f64..250.0, 16),
        ) {
            let cell = |i: usize, x0: f64, y0: f64| Point2::new(x0 + jitter[2 * i], y0 + jitter[2 * i + 1]);
            let src = CornerSet::new(cell(0, 0.0, 0.0), cell(1, 600.0, 0.0), cell(2, 600.0, 800.0), cell(3, 0.0, 800.0));
            let dst = CornerSet::new(cell(4, 0.0, 0.0), cell(5, 600.0, 0.0), cell(6, 600.0, 800.0), cell(7, 0.0, 800.0));
            let h = homography_from_quads(&src, &dst).unwrap();
            let want = dlt_oracle(&src, &dst);
            for i in 0..3 {
                for j in 0..3 {
                    let scale = want[i][j].abs().max(1e-3);
                    proptest::prop_assert!((h.matrix()[i][j] - want[i][j]).abs() / scale < 1e-6,
                        "{:?} vs {:?}", h.matrix(), want);
                }
            }
        }
    }
}
