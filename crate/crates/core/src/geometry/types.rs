use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Point2 { x, y }
    }
}

/// Identity of a receipt corner. Serialized as `tl`, `tr`, `br`, `bl`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CornerLabel {
    Tl,
    Tr,
    Br,
    Bl,
}

impl CornerLabel {
    /// Clockwise order starting top-left.
    pub const ALL: [CornerLabel; 4] = [CornerLabel::Tl, CornerLabel::Tr, CornerLabel::Br, CornerLabel::Bl];

    pub fn as_str(self) -> &'static str {
        match self {
            CornerLabel::Tl => "tl",
            CornerLabel::Tr => "tr",
            CornerLabel::Br => "br",
            CornerLabel::Bl => "bl",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for CornerLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for CornerLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "tl" => Ok(CornerLabel::Tl),
            "tr" => Ok(CornerLabel::Tr),
            "br" => Ok(CornerLabel::Br),
            "bl" => Ok(CornerLabel::Bl),
            other => Err(format!("unknown corner label `{other}`")),
        }
    }
}

/// The four labeled corners of a receipt quadrilateral.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerSet {
    pub tl: Point2,
    pub tr: Point2,
    pub br: Point2,
    pub bl: Point2,
}

impl CornerSet {
    pub fn new(tl: Point2, tr: Point2, br: Point2, bl: Point2) -> Self {
        Self { tl, tr, br, bl }
    }

    /// Points in `tl, tr, br, bl` order.
    pub fn to_array(&self) -> [Point2; 4] {
        [self.tl, self.tr, self.br, self.bl]
    }

    pub fn from_array(p: [Point2; 4]) -> Self {
        Self::new(p[0], p[1], p[2], p[3])
    }

    pub fn get(&self, label: CornerLabel) -> Point2 {
        self.to_array()[label.index()]
    }

    pub fn labeled(&self) -> [(CornerLabel, Point2); 4] {
        let p = self.to_array();
        CornerLabel::ALL.map(|l| (l, p[l.index()]))
    }

    pub fn map(&self, f: impl Fn(Point2) -> Point2) -> CornerSet {
        CornerSet::from_array(self.to_array().map(f))
    }

    /// Signed shoelace area of `tl -> tr -> br -> bl` (positive when clockwise on screen).
    pub fn signed_area(&self) -> f64 {
        let p = self.to_array();
        (0..4)
            .map(|i| {
                let (a, b) = (p[i], p[(i + 1) % 4]);
                a.x * b.y - b.x * a.y
            })
            .sum::<f64>()
            / 2.0
    }

    /// True when the points are finite, pairwise distinct and the
    /// quadrilateral does not cross itself.
    pub fn is_valid(&self) -> bool {
        let p = self.to_array();
        if !p.iter().all(|q| q.is_finite()) {
            return false;
        }
        for i in 0..4 {
            for j in i + 1..4 {
                if p[i] == p[j] {
                    return false;
                }
            }
        }
        !segments_cross(p[0], p[1], p[2], p[3]) && !segments_cross(p[1], p[2], p[3], p[0])
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Degenerate(format!("corner set {self:?} is not a simple quadrilateral")))
        }
    }

    pub fn inside(&self, width: usize, height: usize) -> bool {
        self.to_array().iter().all(|p| {
            p.x >= 0.0 && p.y >= 0.0 && p.x <= (width - 1) as f64 && p.y <= (height - 1) as f64
        })
    }
}

fn orient(a: Point2, b: Point2, c: Point2) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Proper or touching intersection of segments `ab` and `cd`.
fn segments_cross(a: Point2, b: Point2, c: Point2, d: Point2) -> bool {
    let (o1, o2) = (orient(a, b, c), orient(a, b, d));
    let (o3, o4) = (orient(c, d, a), orient(c, d, b));
    if o1 * o2 < 0.0 && o3 * o4 < 0.0 {
        return true;
    }
    let on = |p: Point2, q: Point2, r: Point2, o: f64| {
        o == 0.0
            && r.x >= p.x.min(q.x)
            && r.x <= p.x.max(q.x)
            && r.y >= p.y.min(q.y)
            && r.y <= p.y.max(q.y)
    };
    on(a, b, c, o1) || on(a, b, d, o2) || on(c, d, a, o3) || on(c, d, b, o4)
}

/// Assigns corner roles by coordinate sums and differences:
/// `tl = argmin(x+y)`, `br = argmax(x+y)`, `tr = argmin(y-x)`, `bl = argmax(y-x)`.
/// Ties within a role, or one point winning two roles, are errors.
pub fn order_corners(pts: [Point2; 4]) -> Result<CornerSet> {
    for i in 0..4 {
        if !pts[i].is_finite() {
            return Err(Error::Ordering(format!("non-finite point {:?}", pts[i])));
        }
        for j in i + 1..4 {
            if pts[i] == pts[j] {
                return Err(Error::Ordering(format!("duplicate point {:?}", pts[i])));
            }
        }
    }
    let pick = |key: &dyn Fn(Point2) -> f64, want_max: bool, role: &str| -> Result<usize> {
        let keys: Vec<f64> = pts.iter().map(|&p| key(p)).collect();
        let best = if want_max {
            keys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        } else {
            keys.iter().cloned().fold(f64::INFINITY, f64::min)
        };
        let winners: Vec<usize> = (0..4).filter(|&i| keys[i] == best).collect();
        if winners.len() > 1 {
            return Err(Error::Ordering(format!(
                "{role} is ambiguous between {:?} and {:?}",
                pts[winners[0]], pts[winners[1]]
            )));
        }
        Ok(winners[0])
    };
    let tl = pick(&|p| p.x + p.y, false, "tl")?;
    let br = pick(&|p| p.x + p.y, true, "br")?;
    let tr = pick(&|p| p.y - p.x, false, "tr")?;
    let bl = pick(&|p| p.y - p.x, true, "bl")?;
    let mut roles = [tl, tr, br, bl];
    roles.sort_unstable();
    if roles.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Ordering(format!("one point takes two corner roles in {pts:?}")));
    }
    Ok(CornerSet::new(pts[tl], pts[tr], pts[br], pts[bl]))
}
