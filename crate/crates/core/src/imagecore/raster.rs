use std::path::Path;

use crate::error::{Error, Result};

/// 8-bit raster, row-major with interleaved channels (1 = gray, 3 = RGB).
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterImage")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("channels", &self.channels)
            .finish_non_exhaustive()
    }
}

impl RasterImage {
    /// Image filled with a single value per channel.
    pub fn filled(width: usize, height: usize, pixel: &[u8]) -> Result<Self> {
        check_shape(width, height, pixel.len())?;
        let data = pixel
            .iter()
            .copied()
            .cycle()
            .take(width * height * pixel.len())
            .collect();
        Ok(Self {
            width,
            height,
            channels: pixel.len(),
            data,
        })
    }

    pub fn gray(width: usize, height: usize, value: u8) -> Self {
        Self::filled(width, height, &[value]).expect("valid gray shape")
    }

    pub fn rgb(width: usize, height: usize, pixel: [u8; 3]) -> Self {
        Self::filled(width, height, &pixel).expect("valid rgb shape")
    }

    pub fn from_raw(width: usize, height: usize, channels: usize, data: Vec<u8>) -> Result<Self> {
        check_shape(width, height, channels)?;
        if data.len() != width * height * channels {
            return Err(Error::BufferSize {
                width,
                height,
                channels,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    /// Builds a single-channel image from a per-pixel function.
    pub fn from_fn_gray(width: usize, height: usize, f: impl Fn(usize, usize) -> u8) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_raw(width, height, 1, data).expect("valid gray shape")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn row(&self, y: usize) -> &[u8] {
        let stride = self.width * self.channels;
        &self.data[y * stride..(y + 1) * stride]
    }

    #[inline]
    fn offset(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    /// Channel values at `(x, y)`, or `None` outside the image.
    pub fn pixel(&self, x: usize, y: usize) -> Option<&[u8]> {
        if x >= self.width || y >= self.height {
            return None;
        }
        let o = self.offset(x, y);
        Some(&self.data[o..o + self.channels])
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, value: &[u8]) {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        assert_eq!(value.len(), self.channels);
        let o = self.offset(x, y);
        self.data[o..o + self.channels].copy_from_slice(value);
    }

    /// Value of channel `c` at `(x, y)`. Panics out of bounds.
    #[inline]
    pub fn sample(&self, x: usize, y: usize, c: usize) -> u8 {
        self.data[self.offset(x, y) + c]
    }

    /// Converts to 3 channels, replicating gray values.
    pub fn to_rgb(&self) -> RasterImage {
        if self.channels == 3 {
            return self.clone();
        }
        let data = self.data.iter().flat_map(|&v| [v, v, v]).collect();
        RasterImage::from_raw(self.width, self.height, 3, data).expect("rgb shape")
    }

    /// Rotates the image 90 degrees clockwise.
    pub fn rotate90(&self) -> RasterImage {
        let (w, h, c) = (self.width, self.height, self.channels);
        let mut out = vec![0u8; self.data.len()];
        for y in 0..h {
            for x in 0..w {
                let nx = h - 1 - y;
                let ny = x;
                let src = self.offset(x, y);
                let dst = (ny * h + nx) * c;
                out[dst..dst + c].copy_from_slice(&self.data[src..src + c]);
            }
        }
        RasterImage::from_raw(h, w, c, out).expect("rotated shape")
    }

    /// Bilinear resize with corner pixels aligned: output pixel `i` samples the
    /// source at `i * (src - 1) / (dst - 1)`.
    pub fn resize(&self, width: usize, height: usize) -> Result<RasterImage> {
        check_shape(width, height, self.channels)?;
        let sx = scale_aligned(self.width, width);
        let sy = scale_aligned(self.height, height);
        let c = self.channels;
        let mut out = vec![0u8; width * height * c];
        let mut acc = [0.0f64; 3];
        for y in 0..height {
            let fy = y as f64 * sy;
            for x in 0..width {
                self.bilinear_into(x as f64 * sx, fy, &mut acc[..c]);
                let o = (y * width + x) * c;
                for k in 0..c {
                    out[o + k] = round_u8(acc[k]);
                }
            }
        }
        RasterImage::from_raw(width, height, c, out)
    }

    /// Bilinear sample at a real position, clamped to the image (edge replication).
    pub fn bilinear_into(&self, x: f64, y: f64, out: &mut [f64]) {
        let maxx = (self.width - 1) as f64;
        let maxy = (self.height - 1) as f64;
        let x = if x.is_finite() { x.clamp(0.0, maxx) } else { 0.0 };
        let y = if y.is_finite() { y.clamp(0.0, maxy) } else { 0.0 };
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let ax = x - x0 as f64;
        let ay = y - y0 as f64;
        let c = self.channels;
        let (o00, o10) = (self.offset(x0, y0), self.offset(x1, y0));
        let (o01, o11) = (self.offset(x0, y1), self.offset(x1, y1));
        for (k, slot) in out.iter_mut().enumerate().take(c) {
            let top = self.data[o00 + k] as f64 * (1.0 - ax) + self.data[o10 + k] as f64 * ax;
            let bot = self.data[o01 + k] as f64 * (1.0 - ax) + self.data[o11 + k] as f64 * ax;
            *slot = top * (1.0 - ay) + bot * ay;
        }
    }

    /// Mean absolute difference over pixels at least `margin` away from every border.
    pub fn mean_abs_diff_interior(&self, other: &RasterImage, margin: usize) -> Option<f64> {
        if self.width != other.width
            || self.height != other.height
            || self.channels != other.channels
            || self.width <= 2 * margin
            || self.height <= 2 * margin
        {
            return None;
        }
        let c = self.channels;
        let mut sum = 0u64;
        let mut n = 0u64;
        for y in margin..self.height - margin {
            let (ra, rb) = (self.row(y), other.row(y));
            for i in margin * c..(self.width - margin) * c {
                sum += ra[i].abs_diff(rb[i]) as u64;
                n += 1;
            }
        }
        Some(sum as f64 / n as f64)
    }

    pub fn load(path: &Path) -> Result<RasterImage> {
        let img = image::open(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let rgb = img.to_rgb8();
        let (w, h) = rgb.dimensions();
        RasterImage::from_raw(w as usize, h as usize, 3, rgb.into_raw())
    }

    /// Encodes to PNG or JPEG by extension, writing through a temp file and rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let color = match self.channels {
            1 => image::ExtendedColorType::L8,
            _ => image::ExtendedColorType::Rgb8,
        };
        let format = image::ImageFormat::from_path(path).map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        let mut buf = std::io::Cursor::new(Vec::new());
        let (w, h) = (self.width as u32, self.height as u32);
        let encoded = if format == image::ImageFormat::Png {
            use image::codecs::png::{CompressionType, FilterType, PngEncoder};
            use image::ImageEncoder;
            PngEncoder::new_with_quality(&mut buf, CompressionType::Fast, FilterType::Adaptive)
                .write_image(&self.data, w, h, color)
        } else {
            image::write_buffer_with_format(&mut buf, &self.data, w, h, color, format)
        };
        encoded.map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })?;
        crate::io::write_atomic(path, buf.get_ref())
    }
}

fn check_shape(width: usize, height: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::param("size", format!("{width}x{height} has a zero dimension")));
    }
    if channels != 1 && channels != 3 {
        return Err(Error::param("channels", format!("{channels} (expected 1 or 3)")));
    }
    Ok(())
}

fn scale_aligned(src: usize, dst: usize) -> f64 {
    if dst <= 1 {
        0.0
    } else {
        (src - 1) as f64 / (dst - 1) as f64
    }
}

#[inline]
pub(crate) fn round_u8(v: f64) -> u8 {
    (v + 0.5).floor().clamp(0.0, 255.0) as u8
}
