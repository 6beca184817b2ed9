use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ObfuscateError;
use crate::raster::{LabelMap, RasterImage};

/// Label to RGB lookup table.
pub type Palette = BTreeMap<u32, [u8; 3]>;

/// White (255) where any 4-neighbour carries a different label, black elsewhere.
pub fn render_borders(labels: &LabelMap) -> RasterImage {
    let (w, h) = (labels.width(), labels.height());
    let mut out = RasterImage::filled(w, h, 1, 0).expect("one channel");
    for y in 0..h {
        for x in 0..w {
            let l = labels.get(x, y);
            let border = (x > 0 && labels.get(x - 1, y) != l)
                || (x + 1 < w && labels.get(x + 1, y) != l)
                || (y > 0 && labels.get(x, y - 1) != l)
                || (y + 1 < h && labels.get(x, y + 1) != l);
            if border {
                out.set(x, y, 0, 255);
            }
        }
    }
    out
}

/// Pseudo-random colour per segment. Label 0 is black.
///
/// The colour of a label is the first draw of the ChaCha stream numbered by
/// the label under a key derived from `seed`, so it is independent of image
/// content and of other labels.
pub fn render_random_colors(labels: &LabelMap, seed: u64) -> RasterImage {
    let mut colors: BTreeMap<u32, [u8; 3]> = BTreeMap::new();
    colors.insert(0, [0, 0, 0]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (labels.width(), labels.height());
    let mut data = Vec::with_capacity((w * h * 3) as usize);
    for &l in labels.labels() {
        let c = colors.entry(l).or_insert_with(|| {
            rng.set_stream(l as u64);
            rng.set_word_pos(0);
            let c: [u8; 3] = rng.random();
            if c == [0, 0, 0] {
                [1, 1, 1]
            } else {
                c
            }
        });
        data.extend_from_slice(c);
    }
    RasterImage::new(w, h, 3, data).expect("three channels")
}

/// Per-pixel palette lookup. Label 0 falls back to black when the palette has no entry for it.
pub fn render_semantic_colors(labels: &LabelMap, palette: &Palette) -> Result<RasterImage, ObfuscateError> {
    let mut data = Vec::with_capacity(labels.labels().len() * 3);
    for &l in labels.labels() {
        let c = match palette.get(&l) {
            Some(c) => *c,
            None if l == 0 => [0, 0, 0],
            None => return Err(ObfuscateError::MissingPaletteEntry(l)),
        };
        data.extend_from_slice(&c);
    }
    Ok(RasterImage::new(labels.width(), labels.height(), 3, data).expect("three channels"))
}
