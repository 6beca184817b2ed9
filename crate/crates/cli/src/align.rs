use std::path::PathBuf;

use anyhow::{bail, Result};
use privloc::dataio::{read_scene, write_scene};
use privloc::scene::{ReferenceImage, SceneDatabase};
use privloc::solvers::align_similarity;

use crate::Outcome;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Estimated poses in scene format.
    #[arg(long)]
    est: PathBuf,
    /// Ground-truth poses; images are paired by id.
    #[arg(long)]
    gt: PathBuf,
    /// Estimated scene re-expressed in the ground-truth frame.
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: &Args) -> Result<Outcome> {
    let est = read_scene(&args.est)?;
    let gt = read_scene(&args.gt)?;
    let (src, dst): (Vec<_>, Vec<_>) = est
        .images()
        .iter()
        .filter_map(|e| gt.get(&e.id).map(|g| (e.pose.center(), g.pose.center())))
        .unzip();
    if src.len() < 3 {
        bail!(
            "need at least 3 images present in both scenes, found {}",
            src.len()
        );
    }
    let sim = align_similarity(&src, &dst).map_err(|e| anyhow::anyhow!("alignment failed: {e}"))?;
    let rms = (src
        .iter()
        .zip(&dst)
        .map(|(s, d)| (sim.apply(s) - d).norm_squared())
        .sum::<f64>()
        / src.len() as f64)
        .sqrt();
    let mut out = SceneDatabase::new();
    for im in est.images() {
        let mut aligned = ReferenceImage::new(im.id.clone(), im.intrinsics, sim.transform_pose(&im.pose));
        aligned.raster = im.raster.clone();
        aligned.labelmap = im.labelmap.clone();
        out.push(aligned)?;
    }
    write_scene(&out, &args.out)?;
    println!("scale {}  rms {rms}  pairs {}", sim.scale, src.len());
    Ok(Outcome::Done)
}
