use std::fmt::Write as _;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, ImageFormat, Luma, RgbImage};

use super::{read_bytes, read_text, unwritable, write_bytes, DataError, TextReader};
use crate::obfuscate::Palette;
use crate::raster::{BinaryMask, LabelMap, RasterImage};

pub const PALETTE_HEADER: &str = "PALETTE v1";

fn decode(path: &Path) -> Result<DynamicImage, DataError> {
    let bytes = read_bytes(path)?;
    image::load_from_memory(&bytes).map_err(|e| DataError::Decode {
        path: path.to_owned(),
        offset: 0,
        message: e.to_string(),
    })
}

fn encode_png(path: &Path, img: DynamicImage) -> Result<(), DataError> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, ImageFormat::Png)
        .map_err(|e| unwritable(path, e.to_string()))?;
    write_bytes(path, buf.get_ref())
}

/// Reads a 16-bit single-channel PNG label map (label = pixel value).
pub fn read_labelmap(path: &Path) -> Result<LabelMap, DataError> {
    match decode(path)? {
        DynamicImage::ImageLuma16(img) => {
            let (w, h) = img.dimensions();
            let labels = img.into_raw().into_iter().map(u32::from).collect();
            Ok(LabelMap::new(w, h, labels).expect("buffer matches dimensions"))
        }
        other => Err(DataError::Decode {
            path: path.to_owned(),
            offset: 0,
            message: format!("label maps must be 16-bit grayscale, found {:?}", other.color()),
        }),
    }
}

pub fn write_labelmap(labels: &LabelMap, path: &Path) -> Result<(), DataError> {
    let data: Vec<u16> = labels
        .labels()
        .iter()
        .map(|l| u16::try_from(*l).map_err(|_| unwritable(path, format!("label {l} exceeds 16 bits"))))
        .collect::<Result<_, _>>()?;
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(labels.width(), labels.height(), data).expect("buffer matches dimensions");
    encode_png(path, DynamicImage::ImageLuma16(img))
}

/// Reads a PNG or JPEG. Grayscale stays one channel, everything else becomes RGB.
pub fn read_raster(path: &Path) -> Result<RasterImage, DataError> {
    let img = decode(path)?;
    let (w, h) = (img.width(), img.height());
    let raster = match img {
        DynamicImage::ImageLuma8(g) => RasterImage::new(w, h, 1, g.into_raw()),
        other => RasterImage::new(w, h, 3, other.to_rgb8().into_raw()),
    };
    Ok(raster.expect("buffer matches dimensions"))
}

pub fn write_raster(img: &RasterImage, path: &Path) -> Result<(), DataError> {
    let (w, h, data) = (img.width(), img.height(), img.data().to_vec());
    let dynamic = if img.channels() == 1 {
        DynamicImage::ImageLuma8(GrayImage::from_raw(w, h, data).expect("buffer matches dimensions"))
    } else {
        DynamicImage::ImageRgb8(RgbImage::from_raw(w, h, data).expect("buffer matches dimensions"))
    };
    encode_png(path, dynamic)
}

/// Reads a mask image; any non-zero luma is set.
pub fn read_mask(path: &Path) -> Result<BinaryMask, DataError> {
    let g = decode(path)?.to_luma8();
    let (w, h) = g.dimensions();
    Ok(
        BinaryMask::new(w, h, g.into_raw().into_iter().map(|v| v != 0).collect())
            .expect("buffer matches dimensions"),
    )
}

pub fn write_mask(mask: &BinaryMask, path: &Path) -> Result<(), DataError> {
    let data = mask.bits().iter().map(|b| if *b { 255 } else { 0 }).collect();
    let img = GrayImage::from_raw(mask.width(), mask.height(), data).expect("buffer matches dimensions");
    encode_png(path, DynamicImage::ImageLuma8(img))
}

/// Fails with `DimensionMismatch` unless `found` equals `expected`.
pub fn check_dimensions(path: &Path, expected: (u32, u32), found: (u32, u32)) -> Result<(), DataError> {
    if expected != found {
        return Err(DataError::DimensionMismatch {
            path: path.to_owned(),
            expected,
            found,
        });
    }
    Ok(())
}

/// Reads a palette file: the header, then lines `label r g b`.
pub fn read_palette(path: &Path) -> Result<Palette, DataError> {
    let text = read_text(path)?;
    let mut r = TextReader::new(path, &text)?;
    r.expect_header(PALETTE_HEADER)?;
    let mut palette = Palette::new();
    while let Some((n, _, f)) = r.next_line() {
        r.check_fields(n, &f, 4..=4)?;
        let label: u32 = r.integer(n, "label", f[0])?;
        let rgb = [
            r.integer(n, "r", f[1])?,
            r.integer(n, "g", f[2])?,
            r.integer(n, "b", f[3])?,
        ];
        if palette.insert(label, rgb).is_some() {
            return Err(r.error(n, format!("duplicate label {label}")));
        }
    }
    Ok(palette)
}

pub fn write_palette(palette: &Palette, path: &Path) -> Result<(), DataError> {
    let mut s = format!("{PALETTE_HEADER}\n");
    for (l, [r, g, b]) in palette {
        writeln!(s, "{l} {r} {g} {b}").unwrap();
    }
    write_bytes(path, s.as_bytes())
}
