use super::contour::Contour;

/// Shoelace area; orientation-independent. Fewer than 3 points gives 0.
pub fn polygon_area(c: &Contour) -> f64 {
    let n = c.points.len();
    if n < 3 {
        return 0.0;
    }
    let mut twice = 0i64;
    for i in 0..n {
        let (x0, y0) = c.points[i];
        let (x1, y1) = c.points[(i + 1) % n];
        twice += x0 as i64 * y1 as i64 - x1 as i64 * y0 as i64;
    }
    twice.abs() as f64 / 2.0
}

/// Length of the closed polyline, including the closing segment.
pub fn closed_perimeter(c: &Contour) -> f64 {
    let n = c.points.len();
    if n < 2 {
        return 0.0;
    }
    (0..n)
        .map(|i| {
            let (x0, y0) = c.points[i];
            let (x1, y1) = c.points[(i + 1) % n];
            (((x1 - x0) as f64).powi(2) + ((y1 - y0) as f64).powi(2)).sqrt()
        })
        .sum()
}

/// Closed-contour Ramer-Douglas-Peucker with tolerance
/// `epsilon_fraction * closed_perimeter(c)`.
///
/// The contour is split at its two mutually farthest vertices and each arc is
/// simplified separately. The output is a subset of the input vertices, in
/// input order starting from the first split vertex.
pub fn approx_polygon(c: &Contour, epsilon_fraction: f64) -> Contour {
    let n = c.points.len();
    if n < 3 {
        return c.clone();
    }
    let epsilon = epsilon_fraction * closed_perimeter(c);
    let (a, b) = farthest_pair(&c.points);
    if a == b {
        return Contour::new(vec![c.points[a]]);
    }

    // Arc a -> b and arc b -> a (wrapping), as index sequences into `c`.
    let arc1: Vec<usize> = (a..=b).collect();
    let arc2: Vec<usize> = (b..n).chain(0..=a).collect();

    let mut out = Vec::new();
    for arc in [arc1, arc2] {
        let keep = rdp_open(&c.points, &arc, epsilon);
        // Drop the last vertex: it starts the next arc.
        out.extend(keep[..keep.len() - 1].iter().map(|&i| c.points[i]));
    }
    Contour::new(out)
}

/// Indices of `arc` kept by open-polyline RDP, endpoints included.
fn rdp_open(points: &[(i32, i32)], arc: &[usize], epsilon: f64) -> Vec<usize> {
    let m = arc.len();
    let mut keep = vec![false; m];
    keep[0] = true;
    keep[m - 1] = true;
    let mut stack = vec![(0usize, m - 1)];
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let p = points[arc[lo]];
        let q = points[arc[hi]];
        let mut best = (0.0, lo);
        for k in lo + 1..hi {
            let d = segment_distance(points[arc[k]], p, q);
            if d > best.0 {
                best = (d, k);
            }
        }
        if best.0 > epsilon {
            keep[best.1] = true;
            stack.push((lo, best.1));
            stack.push((best.1, hi));
        }
    }
    arc.iter().zip(keep).filter(|(_, k)| *k).map(|(&i, _)| i).collect()
}

fn segment_distance(p: (i32, i32), a: (i32, i32), b: (i32, i32)) -> f64 {
    let (px, py) = (p.0 as f64, p.1 as f64);
    let (ax, ay) = (a.0 as f64, a.1 as f64);
    let (dx, dy) = (b.0 as f64 - ax, b.1 as f64 - ay);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return ((px - ax).powi(2) + (py - ay).powi(2)).sqrt();
    }
    let t = (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0);
    ((px - ax - t * dx).powi(2) + (py - ay - t * dy).powi(2)).sqrt()
}

/// Pair `(i, j)`, `i <= j`, of vertices at maximal distance. Candidates are
/// restricted to convex-hull vertices (the diameter is always realized there);
/// ties resolve to the lexicographically smallest index pair.
fn farthest_pair(points: &[(i32, i32)]) -> (usize, usize) {
    let hull = convex_hull_indices(points);
    let mut best = (-1i64, 0usize, 0usize);
    for (u, &i) in hull.iter().enumerate() {
        for &j in &hull[u..] {
            let (lo, hi) = (i.min(j), i.max(j));
            let (dx, dy) = (
                (points[i].0 - points[j].0) as i64,
                (points[i].1 - points[j].1) as i64,
            );
            let d2 = dx * dx + dy * dy;
            if d2 > best.0 || (d2 == best.0 && (lo, hi) < (best.1, best.2)) {
                best = (d2, lo, hi);
            }
        }
    }
    (best.1, best.2)
}

/// Monotone-chain hull over distinct positions; each position is represented
/// by its first index in `points`.
fn convex_hull_indices(points: &[(i32, i32)]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by_key(|&i| (points[i], i));
    idx.dedup_by_key(|i| points[*i]);
    if idx.len() <= 2 {
        return idx;
    }
    let cross = |o: usize, a: usize, b: usize| -> i64 {
        let (o, a, b) = (points[o], points[a], points[b]);
        (a.0 - o.0) as i64 * (b.1 - o.1) as i64 - (a.1 - o.1) as i64 * (b.0 - o.0) as i64
    };
    let mut hull: Vec<usize> = Vec::with_capacity(2 * idx.len());
    for &i in &idx {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) <= 0 {
            hull.pop();
        }
        hull.push(i);
    }
    // Upper chain must not pop into the lower one.
    let floor = hull.len() + 1;
    for &i in idx.iter().rev().skip(1) {
        while hull.len() >= floor && cross(hull[hull.len() - 2], hull[hull.len() - 1], i) <= 0 {
            hull.pop();
        }
        hull.push(i);
    }
    hull.pop();
    hull
}
