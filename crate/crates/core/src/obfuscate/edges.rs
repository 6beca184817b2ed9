use super::{to_grayscale, to_u8};
use crate::raster::{BinaryMask, RasterImage};

/// Default CLAHE clip limit, relative to the uniform bin height.
pub const CLAHE_CLIP_LIMIT: f64 = 2.0;
pub const CLAHE_TILES: u32 = 8;
/// Default hysteresis thresholds on the L1 Sobel magnitude of 8-bit input.
pub const CANNY_LOW: f64 = 50.0;
pub const CANNY_HIGH: f64 = 150.0;

/// Tile boundaries `[b_i, b_{i+1})` splitting `len` pixels into `n` nearly equal parts.
fn splits(len: u32, n: u32) -> Vec<u32> {
    (0..=n)
        .map(|i| (i as u64 * len as u64 / n as u64) as u32)
        .collect()
}

/// Histogram clipped at `limit` with the excess spread over all bins, remainder to the lowest bins.
pub(crate) fn clip_histogram(hist: &mut [u32; 256], limit: u32) {
    let mut excess = 0u32;
    for h in hist.iter_mut() {
        if *h > limit {
            excess += *h - limit;
            *h = limit;
        }
    }
    let (each, rest) = (excess / 256, excess % 256);
    for (i, h) in hist.iter_mut().enumerate() {
        *h += each + u32::from((i as u32) < rest);
    }
}

pub(crate) fn clip_limit(area: u32, clip: f64) -> u32 {
    ((clip * area as f64 / 256.0).floor() as u32).max(1)
}

/// Equalization table of one tile. The lowest populated bin maps to 0 and the top bin to 255.
fn tile_lut(hist: &[u32; 256]) -> [u8; 256] {
    let mut cdf = [0u32; 256];
    let mut acc = 0;
    for (c, h) in cdf.iter_mut().zip(hist) {
        acc += h;
        *c = acc;
    }
    let total = acc;
    let cdf_min = cdf.iter().copied().find(|c| *c > 0).unwrap_or(0);
    let mut lut = [0u8; 256];
    for (v, l) in lut.iter_mut().enumerate() {
        *l = if total == cdf_min {
            v as u8
        } else {
            to_u8((cdf[v].saturating_sub(cdf_min)) as f64 * 255.0 / (total - cdf_min) as f64)
        };
    }
    lut
}

/// Contrast-limited adaptive histogram equalization.
///
/// Colour input is converted to luma first. Each of the `tiles × tiles`
/// regions gets its own clipped equalization table. Pixels blend the four
/// nearest tile tables bilinearly by distance to tile centres.
pub fn clahe(img: &RasterImage, clip: f64, tiles: u32) -> RasterImage {
    let g = to_grayscale(img);
    let (w, h) = (g.width(), g.height());
    if w == 0 || h == 0 {
        return g;
    }
    let (tx, ty) = (tiles.clamp(1, w), tiles.clamp(1, h));
    let (xs, ys) = (splits(w, tx), splits(h, ty));
    let mut luts = Vec::with_capacity((tx * ty) as usize);
    for j in 0..ty as usize {
        for i in 0..tx as usize {
            let mut hist = [0u32; 256];
            for y in ys[j]..ys[j + 1] {
                for x in xs[i]..xs[i + 1] {
                    hist[g.get(x, y, 0) as usize] += 1;
                }
            }
            let area = (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
            clip_histogram(&mut hist, clip_limit(area, clip));
            luts.push(tile_lut(&hist));
        }
    }
    let centres = |b: &[u32]| -> Vec<f64> { b.windows(2).map(|p| (p[0] + p[1] - 1) as f64 / 2.0).collect() };
    let (cx, cy) = (centres(&xs), centres(&ys));
    // Lower neighbouring tile and blend weight towards the upper one.
    let locate = |c: &[f64], p: f64| -> (usize, usize, f64) {
        if p <= c[0] {
            return (0, 0, 0.0);
        }
        let last = c.len() - 1;
        if p >= c[last] {
            return (last, last, 0.0);
        }
        let i = c.partition_point(|v| *v <= p) - 1;
        (i, i + 1, (p - c[i]) / (c[i + 1] - c[i]))
    };
    let mut out = g.clone();
    for y in 0..h {
        let (j0, j1, wy) = locate(&cy, y as f64);
        for x in 0..w {
            let (i0, i1, wx) = locate(&cx, x as f64);
            let v = g.get(x, y, 0) as usize;
            let at = |i: usize, j: usize| luts[j * tx as usize + i][v] as f64;
            let top = at(i0, j0) * (1.0 - wx) + at(i1, j0) * wx;
            let bottom = at(i0, j1) * (1.0 - wx) + at(i1, j1) * wx;
            out.set(x, y, 0, to_u8(top * (1.0 - wy) + bottom * wy));
        }
    }
    out
}

fn convolve3(src: &[f64], w: usize, h: usize, k: [[f64; 3]; 3]) -> Vec<f64> {
    let mut out = vec![0.0; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (dy, row) in k.iter().enumerate() {
                let yy = (y + dy).saturating_sub(1).min(h - 1);
                for (dx, kv) in row.iter().enumerate() {
                    let xx = (x + dx).saturating_sub(1).min(w - 1);
                    acc += kv * src[yy * w + xx];
                }
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Smoothed Sobel gradients `(gx, gy)` with edge-replicate padding.
fn gradients(img: &RasterImage) -> (Vec<f64>, Vec<f64>) {
    let g = to_grayscale(img);
    let (w, h) = (g.width() as usize, g.height() as usize);
    let src: Vec<f64> = g.data().iter().map(|v| *v as f64).collect();
    let smooth = convolve3(
        &src,
        w,
        h,
        [
            [1.0 / 16.0, 2.0 / 16.0, 1.0 / 16.0],
            [2.0 / 16.0, 4.0 / 16.0, 2.0 / 16.0],
            [1.0 / 16.0, 2.0 / 16.0, 1.0 / 16.0],
        ],
    );
    let gx = convolve3(
        &smooth,
        w,
        h,
        [[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]],
    );
    let gy = convolve3(
        &smooth,
        w,
        h,
        [[-1.0, -2.0, -1.0], [0.0, 0.0, 0.0], [1.0, 2.0, 1.0]],
    );
    (gx, gy)
}

/// L1 gradient magnitude `|gx| + |gy|` after 3×3 Gaussian smoothing.
#[cfg(test)]
pub(crate) fn gradient_l1(img: &RasterImage) -> Vec<f64> {
    let (gx, gy) = gradients(img);
    gx.iter().zip(&gy).map(|(a, b)| a.abs() + b.abs()).collect()
}

/// Canny edge detector on the L1 Sobel magnitude.
///
/// Non-maximum suppression compares each pixel with its two neighbours along
/// the gradient direction quantized to 0°, 45°, 90° or 135°. A pixel survives
/// if it is strictly larger than the backward neighbour and not smaller than
/// the forward one, which keeps symmetric ridges one pixel wide. Hysteresis
/// keeps weak pixels (`≥ low`) 8-connected to a strong one (`≥ high`).
pub fn canny(img: &RasterImage, low: f64, high: f64) -> BinaryMask {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut mask = BinaryMask::empty(img.width(), img.height());
    if w == 0 || h == 0 {
        return mask;
    }
    let (gx, gy) = gradients(img);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.abs() + b.abs()).collect();
    let tan22 = std::f64::consts::FRAC_PI_8.tan();
    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    // 0 = suppressed, 1 = weak, 2 = strong
    let mut class = vec![0u8; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m < low || m == 0.0 {
                continue;
            }
            let (ax, ay) = (gx[i].abs(), gy[i].abs());
            let (dx, dy): (isize, isize) = if ay <= ax * tan22 {
                (1, 0)
            } else if ax <= ay * tan22 {
                (0, 1)
            } else if (gx[i] > 0.0) == (gy[i] > 0.0) {
                (1, 1)
            } else {
                (1, -1)
            };
            let (xi, yi) = (x as isize, y as isize);
            if m > at(xi - dx, yi - dy) && m >= at(xi + dx, yi + dy) {
                class[i] = if m >= high { 2 } else { 1 };
            }
        }
    }

    let mut stack: Vec<usize> = (0..w * h).filter(|i| class[*i] == 2).collect();
    let mut keep = vec![false; w * h];
    for &i in &stack {
        keep[i] = true;
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
                if class[j] == 1 && !keep[j] {
                    keep[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    for (i, k) in keep.iter().enumerate() {
        if *k {
            mask.set((i % w) as u32, (i / w) as u32, true);
        }
    }
    mask
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn blobs(seed: u64, w: u32, h: u32) -> RasterImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let discs: Vec<(f64, f64, f64, u8)> = (0..8)
            .map(|_| {
                (
                    rng.random_range(0.0..w as f64),
                    rng.random_range(0.0..h as f64),
                    rng.random_range(4.0..20.0),
                    rng.random(),
                )
            })
            .collect();
        let mut img = RasterImage::filled(w, h, 1, 40).unwrap();
        for y in 0..h {
            for x in 0..w {
                for (cx, cy, r, v) in &discs {
                    if (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) < r * r {
                        let noise: i16 = rng.random_range(-10..=10);
                        img.set(x, y, 0, (*v as i16 + noise).clamp(0, 255) as u8);
                    }
                }
            }
        }
        img
    }

    #[test]
    fn clahe_constant_stays_constant() {
        let img = RasterImage::filled(64, 48, 1, 90).unwrap();
        let out = clahe(&img, CLAHE_CLIP_LIMIT, CLAHE_TILES);
        let v = out.get(0, 0, 0);
        assert!(out.data().iter().all(|p| *p == v));
    }

    #[test]
    fn clahe_two_level_image_keeps_levels() {
        let img = RasterImage::new(
            64,
            64,
            1,
            (0..64 * 64)
                .map(|i| if (i % 64 + i / 64 * 3) % 11 < 4 { 0 } else { 255 })
                .collect(),
        )
        .unwrap();
        let out = clahe(&img, CLAHE_CLIP_LIMIT, CLAHE_TILES);
        assert_eq!(out, img);
        let half = RasterImage::new(
            64,
            64,
            1,
            (0..64 * 64).map(|i| if i % 64 < 20 { 0 } else { 255 }).collect(),
        )
        .unwrap();
        assert_eq!(clahe(&half, 3.0, 4), half);
    }

    #[test]
    fn clipped_tile_histograms_respect_limit() {
        let img = blobs(5, 96, 80);
        let (xs, ys) = (splits(96, 8), splits(80, 8));
        for j in 0..8 {
            for i in 0..8 {
                let mut hist = [0u32; 256];
                for y in ys[j]..ys[j + 1] {
                    for x in xs[i]..xs[i + 1] {
                        hist[img.get(x, y, 0) as usize] += 1;
                    }
                }
                let area = (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
                let limit = clip_limit(area, CLAHE_CLIP_LIMIT);
                assert!(limit as f64 <= CLAHE_CLIP_LIMIT * area as f64 / 256.0 || limit == 1);
                let before: u32 = hist.iter().sum();
                let excess: u32 = hist.iter().map(|h| h.saturating_sub(limit)).sum();
                let mut clipped = hist;
                clip_histogram(&mut clipped, limit);
                assert_eq!(clipped.iter().sum::<u32>(), before);
                for (c, h) in clipped.iter().zip(&hist) {
                    assert!(*c <= limit + excess.div_ceil(256));
                    assert!(*c >= (*h).min(limit));
                }
            }
        }
    }

    #[test]
    fn clahe_is_monotone_within_a_tile() {
        let img = blobs(6, 64, 64);
        let out = clahe(&img, CLAHE_CLIP_LIMIT, 1);
        let mut pairs: Vec<(u8, u8)> = img
            .data()
            .iter()
            .copied()
            .zip(out.data().iter().copied())
            .collect();
        pairs.sort();
        assert!(pairs.windows(2).all(|p| p[0].1 <= p[1].1));
    }

    #[test]
    fn canny_constant_is_empty() {
        let img = RasterImage::filled(40, 30, 1, 200).unwrap();
        assert_eq!(canny(&img, CANNY_LOW, CANNY_HIGH).count(), 0);
    }

    #[test]
    fn canny_step_edge_is_one_pixel_wide() {
        let img = RasterImage::new(
            40,
            30,
            1,
            (0..40 * 30).map(|i| if i % 40 < 17 { 0 } else { 255 }).collect(),
        )
        .unwrap();
        let m = canny(&img, CANNY_LOW, CANNY_HIGH);
        for y in 0..30 {
            let row: Vec<u32> = (0..40).filter(|x| m.get(*x, y)).collect();
            assert_eq!(row, vec![16], "row {y}");
        }
        let horizontal = RasterImage::new(
            30,
            40,
            1,
            (0..30 * 40).map(|i| if i / 30 < 17 { 255 } else { 0 }).collect(),
        )
        .unwrap();
        let m = canny(&horizontal, CANNY_LOW, CANNY_HIGH);
        for x in 0..30 {
            let col: Vec<u32> = (0..40).filter(|y| m.get(x, *y)).collect();
            assert_eq!(col.len(), 1);
        }
    }

    #[test]
    fn canny_hysteresis_audit() {
        for seed in 0..10 {
            let img = blobs(seed, 80, 60);
            let (low, high) = (60.0, 220.0);
            let m = canny(&img, low, high);
            let mag = gradient_l1(&img);
            assert!(m.count() > 0);
            let (w, h) = (80usize, 60usize);
            let mut seen = vec![false; w * h];
            for start in 0..w * h {
                if !m.bits()[start] || seen[start] {
                    continue;
                }
                // Flood the 8-connected component and look for a strong pixel.
                let mut stack = vec![start];
                seen[start] = true;
                let mut strong = false;
                while let Some(i) = stack.pop() {
                    assert!(mag[i] >= low);
                    strong |= mag[i] >= high;
                    let (x, y) = ((i % w) as i64, (i / w) as i64);
                    for dy in -1..=1 {
                        for dx in -1..=1 {
                            let (nx, ny) = (x + dx, y + dy);
                            if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 {
                                let j = ny as usize * w + nx as usize;
                                if m.bits()[j] && !seen[j] {
                                    seen[j] = true;
                                    stack.push(j);
                                }
                            }
                        }
                    }
                }
                assert!(strong);
            }
        }
    }
}
