use crate::error::{Error, Result};

use super::raster::RasterImage;

pub const MAX_THRESHOLD: f64 = 500.0;

/// One boolean per pixel; `true` marks an edge (or foreground) pixel.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryMap {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BinaryMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BinaryMap {}x{} ({} set)", self.width, self.height, self.count())
    }
}

impl BinaryMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut m = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                m.bits[y * width + x] = f(x, y);
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// False outside the map.
    #[inline]
    pub fn get(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// 0/255 gray rendering, handy for debugging and the CLI.
    pub fn to_image(&self) -> RasterImage {
        let data = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        RasterImage::from_raw(self.width, self.height, 1, data).expect("map shape")
    }
}

/// Quantized gradient direction used by non-maximum suppression.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientDirection {
    /// Gradient along x: compare left/right.
    Horizontal,
    /// Gradient along y: compare up/down.
    Vertical,
    /// gx and gy share a sign: compare (-1,-1) and (+1,+1).
    Diagonal,
    /// gx and gy differ in sign: compare (+1,-1) and (-1,+1).
    AntiDiagonal,
}

impl GradientDirection {
    pub fn from_gradient(gx: i32, gy: i32) -> Self {
        // tan(22.5) and tan(67.5) in 15-bit fixed point, avoiding float comparisons.
        const TAN22: i64 = 13573;
        let ax = (gx as i64).abs();
        let ay = (gy as i64).abs();
        let tg22 = ax * TAN22;
        let tg67 = tg22 + (ax << 16);
        let ay = ay << 15;
        if ay < tg22 {
            GradientDirection::Horizontal
        } else if ay > tg67 {
            GradientDirection::Vertical
        } else if (gx ^ gy) >= 0 {
            GradientDirection::Diagonal
        } else {
            GradientDirection::AntiDiagonal
        }
    }

    /// Offsets of the two neighbours across the edge.
    pub fn neighbours(self) -> [(isize, isize); 2] {
        match self {
            GradientDirection::Horizontal => [(-1, 0), (1, 0)],
            GradientDirection::Vertical => [(0, -1), (0, 1)],
            GradientDirection::Diagonal => [(-1, -1), (1, 1)],
            GradientDirection::AntiDiagonal => [(1, -1), (-1, 1)],
        }
    }
}

/// 3x3 Sobel responses with replicated borders.
pub fn sobel(img: &RasterImage) -> (Vec<i32>, Vec<i32>) {
    let (w, h) = (img.width(), img.height());
    let d = img.data();
    let at = |x: isize, y: isize| -> i32 {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        d[y * w + x] as i32
    };
    let mut gx = vec![0i32; w * h];
    let mut gy = vec![0i32; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (a, b, c) = (at(x - 1, y - 1), at(x, y - 1), at(x + 1, y - 1));
            let (l, r) = (at(x - 1, y), at(x + 1, y));
            let (e, f, g) = (at(x - 1, y + 1), at(x, y + 1), at(x + 1, y + 1));
            let i = y as usize * w + x as usize;
            gx[i] = (c + 2 * r + g) - (a + 2 * l + e);
            gy[i] = (e + 2 * f + g) - (a + 2 * b + c);
        }
    }
    (gx, gy)
}

pub fn validate_threshold(name: &'static str, t: f64) -> Result<()> {
    if !(0.0..=MAX_THRESHOLD).contains(&t) {
        return Err(Error::param(name, format!("{t} (expected 0..={MAX_THRESHOLD})")));
    }
    Ok(())
}

/// Canny edge detector on a gray image.
///
/// Gradients come from 3x3 Sobel kernels with L1 magnitude `|gx| + |gy|`.
/// Non-maximum suppression keeps a pixel when it beats the first neighbour
/// across the edge strictly and the second one non-strictly (both strictly on
/// diagonals), so plateaus yield a single-pixel line. Hysteresis seeds on
/// magnitude above the higher threshold and grows through 8-connected pixels
/// above the lower one. Threshold order does not matter.
pub fn canny(img: &RasterImage, threshold1: f64, threshold2: f64) -> Result<BinaryMap> {
    validate_threshold("canny_t1", threshold1)?;
    validate_threshold("canny_t2", threshold2)?;
    if img.channels() != 1 {
        return Err(Error::param("channels", "canny expects a gray image"));
    }
    let low = threshold1.min(threshold2);
    let high = threshold1.max(threshold2);
    let (w, h) = (img.width(), img.height());
    let (gx, gy) = sobel(img);
    let mag: Vec<i32> = gx.iter().zip(&gy).map(|(a, b)| a.abs() + b.abs()).collect();
    let mag_at = |x: isize, y: isize| -> i32 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    // 0 = suppressed, 1 = weak candidate, 2 = strong seed
    let mut state = vec![0u8; w * h];
    let mut stack = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if (m as f64) <= low {
                continue;
            }
            let dir = GradientDirection::from_gradient(gx[i], gy[i]);
            let [(ax, ay), (bx, by)] = dir.neighbours();
            let (xi, yi) = (x as isize, y as isize);
            let ma = mag_at(xi + ax, yi + ay);
            let mb = mag_at(xi + bx, yi + by);
            let keep = match dir {
                GradientDirection::Horizontal | GradientDirection::Vertical => m > ma && m >= mb,
                _ => m > ma && m > mb,
            };
            if !keep {
                continue;
            }
            if (m as f64) > high {
                state[i] = 2;
                stack.push(i);
            } else {
                state[i] = 1;
            }
        }
    }

    let mut out = BinaryMap::new(w, h);
    for &i in &stack {
        out.bits[i] = true;
    }
    while let Some(i) = stack.pop() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if state[j] == 1 && !out.bits[j] {
                    out.bits[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    Ok(out)
}
