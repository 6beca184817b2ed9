use super::{to_u8, ObfuscateError};
use crate::raster::RasterImage;

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let k: Vec<f64> = (0..size)
        .map(|i| (-(i as f64 - r).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with edge-replicate padding.
pub fn gaussian_blur(img: &RasterImage, kernel_px: usize, sigma: f64) -> Result<RasterImage, ObfuscateError> {
    if kernel_px < 3 || kernel_px.is_multiple_of(2) {
        return Err(ObfuscateError::InvalidKernel(kernel_px));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(ObfuscateError::InvalidSigma(sigma));
    }
    let kernel = gaussian_kernel(kernel_px, sigma);
    let r = (kernel_px / 2) as i64;
    let (w, h, c) = (img.width() as i64, img.height() as i64, img.channels() as usize);
    let src = img.data();
    let idx = |x: i64, y: i64| (y * w + x) as usize * c;

    let mut tmp = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                tmp[idx(x, y) + ch] = kernel
                    .iter()
                    .enumerate()
                    .map(|(i, k)| k * src[idx((x + i as i64 - r).clamp(0, w - 1), y) + ch] as f64)
                    .sum();
            }
        }
    }
    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                let v: f64 = kernel
                    .iter()
                    .enumerate()
                    .map(|(i, k)| k * tmp[idx(x, (y + i as i64 - r).clamp(0, h - 1)) + ch])
                    .sum();
                out[idx(x, y) + ch] = to_u8(v);
            }
        }
    }
    Ok(RasterImage::new(img.width(), img.height(), img.channels(), out).expect("same shape"))
}

/// Box-filter downsampling by `factor` followed by nearest-neighbour upsampling.
///
/// Partial blocks at the right and bottom edges average the pixels they cover.
pub fn pixelate(img: &RasterImage, factor: u32) -> Result<RasterImage, ObfuscateError> {
    let max = img.width().min(img.height());
    if factor < 2 || factor > max {
        return Err(ObfuscateError::InvalidFactor { factor, max });
    }
    let mut out = img.clone();
    let c = img.channels();
    for by in (0..img.height()).step_by(factor as usize) {
        for bx in (0..img.width()).step_by(factor as usize) {
            let xs = bx..(bx + factor).min(img.width());
            let ys = by..(by + factor).min(img.height());
            let n = (xs.len() * ys.len()) as u64;
            for ch in 0..c {
                let mut sum = 0u64;
                for y in ys.clone() {
                    for x in xs.clone() {
                        sum += img.get(x, y, ch) as u64;
                    }
                }
                let mean = ((sum + n / 2) / n) as u8;
                for y in ys.clone() {
                    for x in xs.clone() {
                        out.set(x, y, ch, mean);
                    }
                }
            }
        }
    }
    Ok(out)
}
