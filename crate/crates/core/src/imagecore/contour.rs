use super::canny::BinaryMap;

/// Closed polyline of integer pixel coordinates `(x, y)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Contour {
    pub points: Vec<(i32, i32)>,
}

impl Contour {
    pub fn new(points: Vec<(i32, i32)>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

// Clockwise on screen (y grows downward), starting west.
const DIRS: [(isize, isize); 8] = [
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
];

fn dir_index(from: (isize, isize), to: (isize, isize)) -> usize {
    let d = (to.0 - from.0, to.1 - from.1);
    DIRS.iter().position(|&o| o == d).expect("neighbouring pixels")
}

/// Outer border of every 8-connected foreground component.
///
/// Components are discovered in row-major order of their top-left-most pixel,
/// and each border is traced with Suzuki-Abe border following starting there.
/// Hole borders are not reported.
pub fn find_contours(map: &BinaryMap) -> Vec<Contour> {
    let (w, h) = (map.width(), map.height());
    let mut visited = vec![false; w * h];
    let mut contours = Vec::new();
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if visited[y * w + x] || !map.get(x as isize, y as isize) {
                continue;
            }
            contours.push(trace_outer_border(map, (x as isize, y as isize)));

            visited[y * w + x] = true;
            stack.push((x as isize, y as isize));
            while let Some((cx, cy)) = stack.pop() {
                for (dx, dy) in DIRS {
                    let (nx, ny) = (cx + dx, cy + dy);
                    if map.get(nx, ny) && !visited[ny as usize * w + nx as usize] {
                        visited[ny as usize * w + nx as usize] = true;
                        stack.push((nx, ny));
                    }
                }
            }
        }
    }
    contours
}

/// Follows the outer border that starts at `start`, whose west neighbour is background.
fn trace_outer_border(map: &BinaryMap, start: (isize, isize)) -> Contour {
    let at = |p: (isize, isize)| map.get(p.0, p.1);
    let step = |p: (isize, isize), d: usize| (p.0 + DIRS[d].0, p.1 + DIRS[d].1);

    let Some(first) = (0..8).map(|d| step(start, d)).find(|&q| at(q)) else {
        return Contour::new(vec![(start.0 as i32, start.1 as i32)]);
    };

    let mut points = Vec::new();
    let mut prev = first;
    let mut cur = start;
    loop {
        points.push((cur.0 as i32, cur.1 as i32));
        let d = dir_index(cur, prev);
        let next = (1..=8)
            .map(|k| step(cur, (d + 8 - k) % 8))
            .find(|&q| at(q))
            .expect("component has at least two pixels");
        if next == start && cur == first {
            break;
        }
        prev = cur;
        cur = next;
    }
    Contour::new(points)
}
