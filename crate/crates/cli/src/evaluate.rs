use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::Result;
use privloc::dataio::{read_results, read_scene, write_results};
use privloc::synth::{emit_table, evaluate, ThresholdSet};

use crate::{Outcome, UsageError};

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long)]
    results: PathBuf,
    /// Scene file with ground-truth query poses.
    #[arg(long)]
    gt: PathBuf,
    /// `pos,rot;pos,rot;...` in metres (scene units) and degrees.
    #[arg(long, default_value = "0.25,2;0.5,5;5,10")]
    thresholds: String,
    /// Also write the summary table as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the results with error columns filled in.
    #[arg(long)]
    per_query: Option<PathBuf>,
    /// Row label in the summary table.
    #[arg(long)]
    label: Option<String>,
}

pub fn run(args: &Args) -> Result<Outcome> {
    let thresholds = ThresholdSet::parse(&args.thresholds).map_err(|e| UsageError(e.to_string()))?;
    let mut results = read_results(&args.results)?;
    let gt: HashMap<_, _> = read_scene(&args.gt)?
        .images()
        .iter()
        .map(|im| (im.id.clone(), im.pose))
        .collect();
    let report = evaluate(&results, &gt, &thresholds)?;
    let label = args.label.clone().unwrap_or_else(|| {
        args.results
            .file_stem()
            .map_or("results".into(), |s| s.to_string_lossy().into_owned())
    });
    let (text, csv) = emit_table(&[(label, report.clone())]);
    print!("{text}");
    if let Some(p) = &args.out {
        std::fs::write(p, csv).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))?;
    }
    if let Some(p) = &args.per_query {
        for (r, q) in results.iter_mut().zip(&report.queries) {
            r.pos_err_m = Some(q.pos_err);
            r.rot_err_deg = Some(q.rot_err_deg);
        }
        write_results(&results, p)?;
    }
    Ok(Outcome::Done)
}
