use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use privloc::dataio::{check_dimensions, read_labelmap, read_mask, read_palette, read_raster, write_raster};
use privloc::obfuscate::{
    canny, clahe, gaussian_blur, infill_diffusion, mask_fill, pixelate, render_borders, render_random_colors,
    render_semantic_colors, CANNY_HIGH, CANNY_LOW, CLAHE_CLIP_LIMIT, CLAHE_TILES,
};
use privloc::raster::RasterImage;
use rayon::prelude::*;

use crate::{Outcome, UsageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Blur41,
    Blur81,
    Pixelate10,
    Pixelate20,
    Canny,
    MaskFill,
    Infill,
    Borders,
    RandomColors,
    SemanticColors,
}

impl Method {
    fn needs_labelmaps(self) -> bool {
        matches!(
            self,
            Method::Borders | Method::RandomColors | Method::SemanticColors
        )
    }

    fn needs_masks(self) -> bool {
        matches!(self, Method::MaskFill | Method::Infill)
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Directory of PNG or JPEG images.
    #[arg(long = "in")]
    input: PathBuf,
    /// Output directory; every result is written as `<stem>.png`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum)]
    method: Method,
    /// Directory of 16-bit label maps named `<stem>.png`.
    #[arg(long)]
    labelmaps: Option<PathBuf>,
    /// Directory of binary masks named `<stem>.png`.
    #[arg(long)]
    masks: Option<PathBuf>,
    #[arg(long, default_value_t = CANNY_LOW)]
    canny_low: f64,
    #[arg(long, default_value_t = CANNY_HIGH)]
    canny_high: f64,
    /// Label to colour table for `semantic-colors`.
    #[arg(long)]
    palette: Option<PathBuf>,
    /// Jacobi passes for `infill`.
    #[arg(long, default_value_t = 200)]
    infill_iterations: usize,
}

fn list_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "jpg" | "jpeg"))
        })
        .collect();
    files.sort();
    Ok(files)
}

pub fn run(args: &Args, seed: u64) -> Result<Outcome> {
    let m = args.method;
    if m.needs_labelmaps() && args.labelmaps.is_none() {
        return Err(UsageError(format!("--method {m:?} requires --labelmaps")).into());
    }
    if m.needs_masks() && args.masks.is_none() {
        return Err(UsageError(format!("--method {m:?} requires --masks")).into());
    }
    if m == Method::SemanticColors && args.palette.is_none() {
        return Err(UsageError("--method semantic-colors requires --palette".into()).into());
    }
    if !(0.0 <= args.canny_low && args.canny_low <= args.canny_high) {
        return Err(UsageError("need 0 <= --canny-low <= --canny-high".into()).into());
    }
    let palette = args.palette.as_deref().map(read_palette).transpose()?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let files = list_images(&args.input)?;
    files.par_iter().try_for_each(|path| -> Result<()> {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .context("image name is not UTF-8")?;
        let img = read_raster(path)?;
        let dims = (img.width(), img.height());
        let side = |dir: &Option<PathBuf>| dir.as_ref().map(|d| d.join(format!("{stem}.png")));
        let labels = match side(&args.labelmaps).filter(|_| m.needs_labelmaps()) {
            Some(p) => {
                let l = read_labelmap(&p)?;
                check_dimensions(&p, dims, (l.width(), l.height()))?;
                Some(l)
            }
            None => None,
        };
        let mask = match side(&args.masks).filter(|_| m.needs_masks()) {
            Some(p) => {
                let k = read_mask(&p)?;
                check_dimensions(&p, dims, (k.width(), k.height()))?;
                Some(k)
            }
            None => None,
        };
        let out: RasterImage = match m {
            Method::Blur41 => gaussian_blur(&img, 41, 6.5)?,
            Method::Blur81 => gaussian_blur(&img, 81, 12.5)?,
            Method::Pixelate10 => pixelate(&img, 10)?,
            Method::Pixelate20 => pixelate(&img, 20)?,
            Method::Canny => {
                let edges = canny(
                    &clahe(&img, CLAHE_CLIP_LIMIT, CLAHE_TILES),
                    args.canny_low,
                    args.canny_high,
                );
                let data = edges.bits().iter().map(|b| if *b { 255 } else { 0 }).collect();
                RasterImage::new(dims.0, dims.1, 1, data)?
            }
            Method::MaskFill => mask_fill(&img, mask.as_ref().unwrap(), None)?,
            Method::Infill => infill_diffusion(&img, mask.as_ref().unwrap(), args.infill_iterations)?,
            Method::Borders => render_borders(labels.as_ref().unwrap()),
            Method::RandomColors => render_random_colors(labels.as_ref().unwrap(), seed),
            Method::SemanticColors => {
                render_semantic_colors(labels.as_ref().unwrap(), palette.as_ref().unwrap())?
            }
        };
        write_raster(&out, &args.out.join(format!("{stem}.png")))?;
        Ok(())
    })?;
    log::info!("wrote {} images to {}", files.len(), args.out.display());
    Ok(Outcome::Done)
}
