use std::path::PathBuf;

use anyhow::Result;
use privloc::synth::{generate_scene, SynthConfig};

use crate::{Outcome, UsageError};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Reference cameras on the ring.
    #[arg(long, default_value_t = 20)]
    cameras: usize,
    #[arg(long, default_value_t = 10)]
    queries: usize,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long, default_value_t = 0.0)]
    noise_px: f64,
    #[arg(long, default_value_t = 0.0)]
    outlier_frac: f64,
    /// Side of the point cube and radius of the camera ring.
    #[arg(long, default_value_t = 5.0)]
    extent: f64,
    #[arg(long)]
    out: PathBuf,
}

pub fn run(args: &Args, seed: u64) -> Result<Outcome> {
    let cfg = SynthConfig {
        num_cameras: args.cameras,
        num_queries: args.queries,
        num_points: args.points,
        scene_extent: args.extent,
        noise_px: args.noise_px,
        outlier_frac: args.outlier_frac,
        seed,
        ..Default::default()
    };
    let scene = generate_scene(&cfg).map_err(|e| UsageError(e.to_string()))?;
    scene.write(&args.out)?;
    let n: usize = scene.matches.iter().map(|m| m.len()).sum();
    println!(
        "wrote {} references, {} queries, {n} matches to {}",
        scene.references.len(),
        scene.queries.len(),
        args.out.display()
    );
    Ok(Outcome::Done)
}
