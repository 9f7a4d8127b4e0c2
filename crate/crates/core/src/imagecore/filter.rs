use crate::error::{Error, Result};

use super::raster::{round_u8, RasterImage};

pub const MAX_KERNEL: usize = 21;

/// BT.601 luma: `round(0.299 R + 0.587 G + 0.114 B)`. Gray input is returned as is.
pub fn to_grayscale(img: &RasterImage) -> RasterImage {
    if img.channels() == 1 {
        return img.clone();
    }
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| round_u8(0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64))
        .collect();
    RasterImage::from_raw(img.width(), img.height(), 1, data).expect("gray shape")
}

pub fn validate_kernel(kernel: usize) -> Result<()> {
    if kernel == 0 || kernel.is_multiple_of(2) || kernel > MAX_KERNEL {
        return Err(Error::param(
            "gaussian_kernel",
            format!("{kernel} (expected odd value in 1..={MAX_KERNEL})"),
        ));
    }
    Ok(())
}

/// Standard deviation implied by an odd kernel size.
pub fn sigma_for_kernel(kernel: usize) -> f64 {
    0.3 * ((kernel as f64 - 1.0) * 0.5 - 1.0) + 0.8
}

/// Normalized 1-D Gaussian weights of length `kernel`.
pub fn gaussian_weights(kernel: usize) -> Result<Vec<f64>> {
    validate_kernel(kernel)?;
    let sigma = sigma_for_kernel(kernel);
    let half = (kernel / 2) as f64;
    let mut w: Vec<f64> = (0..kernel)
        .map(|i| {
            let d = i as f64 - half;
            (-(d * d) / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= sum);
    Ok(w)
}

/// Separable Gaussian blur with edge-replicated borders.
pub fn gaussian_blur(img: &RasterImage, kernel: usize) -> Result<RasterImage> {
    let weights = gaussian_weights(kernel)?;
    if kernel == 1 {
        return Ok(img.clone());
    }
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let half = (kernel / 2) as isize;
    let src = img.data();

    let mut horiz = vec![0.0f64; w * h * c];
    for y in 0..h {
        let row = &src[y * w * c..(y + 1) * w * c];
        let out = &mut horiz[y * w * c..(y + 1) * w * c];
        for x in 0..w {
            for k in 0..c {
                let mut acc = 0.0;
                for (i, wt) in weights.iter().enumerate() {
                    let sx = (x as isize + i as isize - half).clamp(0, w as isize - 1) as usize;
                    acc += wt * row[sx * c + k] as f64;
                }
                out[x * c + k] = acc;
            }
        }
    }

    let mut out = vec![0u8; w * h * c];
    let stride = w * c;
    for y in 0..h {
        for i in 0..stride {
            let mut acc = 0.0;
            for (j, wt) in weights.iter().enumerate() {
                let sy = (y as isize + j as isize - half).clamp(0, h as isize - 1) as usize;
                acc += wt * horiz[sy * stride + i];
            }
            out[y * stride + i] = round_u8(acc);
        }
    }
    RasterImage::from_raw(w, h, c, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_reference_pixels() {
        let img = RasterImage::from_raw(3, 1, 3, vec![255, 255, 255, 0, 0, 0, 255, 0, 0]).unwrap();
        let g = to_grayscale(&img);
        assert_eq!(g.data(), &[255, 0, 76]);
    }

    #[test]
    fn grayscale_passes_single_channel_through() {
        let img = RasterImage::from_fn_gray(4, 4, |x, y| (x * y) as u8);
        assert_eq!(to_grayscale(&img), img);
    }

    #[test]
    fn kernel_validation() {
        for bad in [0, 2, 4, 22, 23] {
            assert!(gaussian_blur(&RasterImage::gray(5, 5, 0), bad).is_err(), "{bad}");
        }
        for ok in (1..=21).step_by(2) {
            assert!(gaussian_weights(ok).is_ok());
        }
    }

    #[test]
    fn kernel_one_is_identity() {
        let img = RasterImage::from_fn_gray(9, 7, |x, y| ((x * 37) ^ (y * 11)) as u8);
        assert_eq!(gaussian_blur(&img, 1).unwrap(), img);
    }

    #[test]
    fn constant_image_is_preserved() {
        for k in [3, 5, 21] {
            let img = RasterImage::gray(30, 30, 173);
            assert_eq!(gaussian_blur(&img, k).unwrap(), img);
        }
    }

    #[test]
    fn sigma_matches_kernel_convention() {
        assert!((sigma_for_kernel(5) - 1.1).abs() < 1e-12);
        assert!((sigma_for_kernel(3) - 0.8).abs() < 1e-12);
    }

    /// Dense 2-D convolution with an explicitly built 2-D Gaussian.
    fn dense_blur(img: &RasterImage, kernel: usize) -> Vec<u8> {
        let sigma = sigma_for_kernel(kernel);
        let half = (kernel / 2) as isize;
        let mut k2 = vec![0.0; kernel * kernel];
        for j in 0..kernel {
            for i in 0..kernel {
                let dx = i as f64 - half as f64;
                let dy = j as f64 - half as f64;
                k2[j * kernel + i] = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
            }
        }
        let s: f64 = k2.iter().sum();
        k2.iter_mut().for_each(|v| *v /= s);
        let (w, h) = (img.width() as isize, img.height() as isize);
        let mut out = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for j in 0..kernel as isize {
                    for i in 0..kernel as isize {
                        let sx = (x + i - half).clamp(0, w - 1) as usize;
                        let sy = (y + j - half).clamp(0, h - 1) as usize;
                        acc += k2[(j * kernel as isize + i) as usize] * img.sample(sx, sy, 0) as f64;
                    }
                }
                out.push((acc + 0.5).floor() as u8);
            }
        }
        out
    }

    #[test]
    fn impulse_response_matches_dense_convolution() {
        let mut img = RasterImage::gray(11, 11, 0);
        img.set_pixel(5, 5, &[255]);
        let blurred = gaussian_blur(&img, 5).unwrap();
        assert_eq!(blurred.data(), dense_blur(&img, 5).as_slice());
        // 255 * w(0)^2 = 34.82 with sigma 1.1, computed independently.
        assert_eq!(blurred.sample(5, 5, 0), 35);
    }

    #[test]
    fn textured_image_matches_dense_convolution() {
        let img = RasterImage::from_fn_gray(17, 13, |x, y| ((x * 53 + y * 97) % 251) as u8);
        for k in [3, 7] {
            let fast = gaussian_blur(&img, k).unwrap();
            let dense = dense_blur(&img, k);
            for (a, b) in fast.data().iter().zip(&dense) {
                assert!(a.abs_diff(*b) <= 1);
            }
        }
    }
}
