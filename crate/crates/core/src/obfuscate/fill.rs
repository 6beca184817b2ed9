use super::{to_u8, ObfuscateError};
use crate::raster::{BinaryMask, RasterImage};

fn check(img: &RasterImage, mask: &BinaryMask) -> Result<(), ObfuscateError> {
    if (img.width(), img.height()) != (mask.width(), mask.height()) {
        return Err(ObfuscateError::DimensionMismatch {
            image: (img.width(), img.height()),
            mask: (mask.width(), mask.height()),
        });
    }
    Ok(())
}

/// Sets masked pixels to `color` (black when `None`).
pub fn mask_fill(
    img: &RasterImage,
    mask: &BinaryMask,
    color: Option<&[u8]>,
) -> Result<RasterImage, ObfuscateError> {
    check(img, mask)?;
    let c = img.channels() as usize;
    let black = vec![0u8; c];
    let color = color.unwrap_or(&black);
    if color.len() != c {
        return Err(ObfuscateError::InvalidColor {
            got: color.len(),
            expected: c,
        });
    }
    let mut out = img.clone();
    for (px, m) in out.data_mut().chunks_exact_mut(c).zip(mask.bits()) {
        if *m {
            px.copy_from_slice(color);
        }
    }
    Ok(out)
}

const NEIGHBOURS: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Fills masked pixels by diffusion from their surroundings.
///
/// This is a simple stand-in for fast-marching (Telea) inpainting. Masked
/// pixels are first seeded layer by layer from the region boundary inward,
/// each taking the mean of its already-known 8-neighbours. Then `iterations`
/// Jacobi passes replace every masked pixel by the mean of its 8-neighbours.
/// Unmasked pixels are never modified.
pub fn infill_diffusion(
    img: &RasterImage,
    mask: &BinaryMask,
    iterations: usize,
) -> Result<RasterImage, ObfuscateError> {
    check(img, mask)?;
    let (w, h, c) = (img.width() as i64, img.height() as i64, img.channels() as usize);
    let masked: Vec<usize> = (0..(w * h) as usize).filter(|i| mask.bits()[*i]).collect();
    if masked.is_empty() {
        return Ok(img.clone());
    }
    let mut val: Vec<f64> = img.data().iter().map(|v| *v as f64).collect();
    let mut known: Vec<bool> = mask.bits().iter().map(|m| !m).collect();
    let neighbours = |i: usize| {
        let (x, y) = (i as i64 % w, i as i64 / w);
        NEIGHBOURS.iter().filter_map(move |(dx, dy)| {
            let (nx, ny) = (x + dx, y + dy);
            (nx >= 0 && ny >= 0 && nx < w && ny < h).then_some((ny * w + nx) as usize)
        })
    };

    let mut pending = masked.clone();
    while !pending.is_empty() {
        let mut layer = Vec::new();
        let mut rest = Vec::new();
        for &i in &pending {
            let mut sum = vec![0.0; c];
            let mut n = 0;
            for j in neighbours(i).filter(|j| known[*j]) {
                for (s, v) in sum.iter_mut().zip(&val[j * c..(j + 1) * c]) {
                    *s += v;
                }
                n += 1;
            }
            if n > 0 {
                layer.push((i, sum.into_iter().map(|s| s / n as f64).collect::<Vec<_>>()));
            } else {
                rest.push(i);
            }
        }
        if layer.is_empty() {
            break;
        }
        for (i, v) in layer {
            val[i * c..(i + 1) * c].copy_from_slice(&v);
            known[i] = true;
        }
        pending = rest;
    }

    let mut next = val.clone();
    for _ in 0..iterations {
        for &i in &masked {
            let mut sum = vec![0.0; c];
            let mut n = 0;
            for j in neighbours(i) {
                for (s, v) in sum.iter_mut().zip(&val[j * c..(j + 1) * c]) {
                    *s += v;
                }
                n += 1;
            }
            for (k, s) in sum.iter().enumerate() {
                next[i * c + k] = s / n as f64;
            }
        }
        std::mem::swap(&mut val, &mut next);
    }

    let mut out = img.clone();
    for &i in &masked {
        for k in 0..c {
            out.data_mut()[i * c + k] = to_u8(val[i * c + k]);
        }
    }
    Ok(out)
}
