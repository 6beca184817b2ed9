//! Deterministic privacy-reducing image renderings.

mod edges;
mod fill;
mod filters;
mod render;

pub use edges::{canny, clahe, CANNY_HIGH, CANNY_LOW, CLAHE_CLIP_LIMIT, CLAHE_TILES};
pub use fill::{infill_diffusion, mask_fill};
pub use filters::{gaussian_blur, pixelate};
pub use render::{render_borders, render_random_colors, render_semantic_colors, Palette};

use crate::raster::RasterImage;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ObfuscateError {
    #[error("kernel size must be odd and at least 3, got {0}")]
    InvalidKernel(usize),
    #[error("sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("pixelation factor {factor} outside 2..={max}")]
    InvalidFactor { factor: u32, max: u32 },
    #[error("dimension mismatch: image {image:?}, mask {mask:?}")]
    DimensionMismatch { image: (u32, u32), mask: (u32, u32) },
    #[error("fill color has {got} channels, image has {expected}")]
    InvalidColor { got: usize, expected: usize },
    #[error("no palette entry for label {0}")]
    MissingPaletteEntry(u32),
}

/// Single-channel copy, using BT.601 luma weights for colour input.
pub fn to_grayscale(img: &RasterImage) -> RasterImage {
    if img.channels() == 1 {
        return img.clone();
    }
    let data = img
        .data()
        .chunks_exact(3)
        .map(|p| (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round() as u8)
        .collect();
    RasterImage::new(img.width(), img.height(), 1, data).expect("sizes agree")
}

pub(crate) fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grayscale_of_gray_pixel() {
        let img = RasterImage::filled(2, 2, 3, 77).unwrap();
        let g = to_grayscale(&img);
        assert_eq!(g.channels(), 1);
        assert!(g.data().iter().all(|v| *v == 77));
    }
}
