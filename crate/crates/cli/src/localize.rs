use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use privloc::dataio::{
    check_dimensions, image_sizes, read_descriptors, read_labelmap, read_matches, read_scene, write_results,
    ResultRecord,
};
use privloc::geometry::Intrinsics;
use privloc::pipeline::{
    assign_keypoints_to_segments, localize_e5p1, localize_lt, lt_correspondences, match_segments,
    reference_matches, refine_with_segments, retrieve_topk, segment_centroid_matches, select_top_matches,
    GlobalDescriptor, MatchSet, PipelineError, SegmentSupport, DEFAULT_DILATION_PX, DEFAULT_MIN_AREA_PX,
    DEFAULT_QUANTIZATION_PX, POSE_MATCHES, SEGMENT_MATCHES,
};
use privloc::raster::LabelMap;
use privloc::robust::{LocalizationResult, RansacConfig, ReferenceMatches};
use privloc::scene::SceneDatabase;
use rayon::prelude::*;

use crate::{Outcome, UsageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Solver {
    E5p1,
    Lt,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Reference scene file.
    #[arg(long)]
    scene: PathBuf,
    /// Query images in scene format; their poses are ignored.
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    matches: PathBuf,
    /// Global descriptors of queries and references.
    #[arg(long)]
    descriptors: PathBuf,
    /// Descriptors of obfuscated images to retrieve with instead of `--descriptors`.
    #[arg(long)]
    obfuscated_descriptors: Option<PathBuf>,
    #[arg(long, value_enum)]
    solver: Solver,
    #[arg(long, default_value_t = 20)]
    topk: usize,
    /// Add segment-centroid correspondences during final refinement.
    #[arg(long, requires = "labelmaps")]
    refine_segments: bool,
    /// Directory of label maps named `<image id>.png`.
    #[arg(long)]
    labelmaps: Option<PathBuf>,
    /// Inlier threshold in pixels.
    #[arg(long, default_value_t = 3.0)]
    threshold_px: f64,
    /// Grid cell size for query keypoint tracks (`lt`).
    #[arg(long, default_value_t = DEFAULT_QUANTIZATION_PX)]
    quantization_px: f64,
    #[arg(long)]
    out: PathBuf,
}

struct Inputs {
    db: SceneDatabase,
    queries: SceneDatabase,
    matches: HashMap<String, Vec<MatchSet>>,
    ref_descriptors: Vec<GlobalDescriptor>,
    query_descriptors: HashMap<String, GlobalDescriptor>,
}

fn load(args: &Args) -> Result<Inputs> {
    let db = read_scene(&args.scene)?;
    let queries = read_scene(&args.queries)?;
    let sizes = image_sizes([&db, &queries]);
    let mut matches: HashMap<String, Vec<MatchSet>> = HashMap::new();
    for set in read_matches(&args.matches, Some(&sizes))? {
        matches.entry(set.id_a.clone()).or_default().push(set);
    }
    let descriptors = read_descriptors(
        args.obfuscated_descriptors
            .as_deref()
            .unwrap_or(&args.descriptors),
    )?;
    let mut ref_descriptors = Vec::new();
    let mut query_descriptors = HashMap::new();
    for d in descriptors {
        if db.get(&d.id).is_some() {
            ref_descriptors.push(d);
        } else if queries.get(&d.id).is_some() {
            query_descriptors.insert(d.id.clone(), d);
        }
    }
    if let Some(q) = queries
        .images()
        .iter()
        .find(|q| !query_descriptors.contains_key(&q.id))
    {
        anyhow::bail!("no global descriptor for query '{}'", q.id);
    }
    Ok(Inputs {
        db,
        queries,
        matches,
        ref_descriptors,
        query_descriptors,
    })
}

fn labelmap(dir: &Path, id: &str, k: &Intrinsics) -> Result<LabelMap> {
    let p = dir.join(format!("{id}.png"));
    let l = read_labelmap(&p)?;
    check_dimensions(&p, (k.width, k.height), (l.width(), l.height()))?;
    Ok(l)
}

/// Segment-centroid correspondences between the query and each matched reference.
fn centroid_matches(
    dir: &Path,
    query_id: &str,
    k_query: &Intrinsics,
    db: &SceneDatabase,
    sets: &[MatchSet],
) -> Result<Vec<ReferenceMatches>> {
    let lq = labelmap(dir, query_id, k_query)?;
    let mut out = Vec::new();
    for set in sets.iter().filter(|s| !s.is_empty()) {
        let r = db.get(&set.id_b).expect("matches validated against the scene");
        let lr = labelmap(dir, &r.id, &r.intrinsics)?;
        let top = select_top_matches(set, SEGMENT_MATCHES);
        let kq: Vec<_> = top.matches.iter().map(|m| m.a).collect();
        let kr: Vec<_> = top.matches.iter().map(|m| m.b).collect();
        let sq = assign_keypoints_to_segments(&lq, &kq, DEFAULT_DILATION_PX, DEFAULT_MIN_AREA_PX);
        let sr = assign_keypoints_to_segments(&lr, &kr, DEFAULT_DILATION_PX, DEFAULT_MIN_AREA_PX);
        let pairs = match_segments(&sq, &sr);
        let cm = segment_centroid_matches(&pairs, &sq, &sr, query_id, &r.id);
        out.push(ReferenceMatches {
            pose: r.pose,
            intrinsics: r.intrinsics,
            matches: cm.matches.iter().map(|m| (m.a, m.b)).collect(),
        });
    }
    Ok(out)
}

fn localize_one(args: &Args, inputs: &Inputs, index: usize, cfg: &RansacConfig) -> Result<ResultRecord> {
    let q = &inputs.queries.images()[index];
    let retrieved = retrieve_topk(
        &inputs.query_descriptors[&q.id],
        &inputs.ref_descriptors,
        args.topk,
    );
    let all = inputs.matches.get(&q.id).map(Vec::as_slice).unwrap_or(&[]);
    let sets: Vec<MatchSet> = retrieved
        .iter()
        .flat_map(|rid| all.iter().filter(move |s| &s.id_b == rid))
        .map(|s| select_top_matches(s, POSE_MATCHES))
        .collect();
    let cfg = cfg.for_query(index as u64);
    let k = &q.intrinsics;
    let outcome = match args.solver {
        Solver::E5p1 => localize_e5p1(k, &inputs.db, &sets, &cfg),
        Solver::Lt => localize_lt(k, &inputs.db, &sets, &cfg, args.quantization_px),
    };
    let mut result = match outcome {
        Ok(r) => r,
        Err(PipelineError::InsufficientReferences(n)) => {
            log::warn!("query '{}': matches to {n} reference(s) only", q.id);
            LocalizationResult::failure(0, 0)
        }
        Err(e) => return Err(e).with_context(|| format!("query '{}'", q.id)),
    };
    if args.refine_segments && result.is_success() {
        let dir = args.labelmaps.as_deref().expect("clap enforces --labelmaps");
        let centroids = centroid_matches(dir, &q.id, k, &inputs.db, &sets)?;
        result = match args.solver {
            Solver::E5p1 => {
                let refs = reference_matches(&inputs.db, &sets)?;
                refine_with_segments(
                    &result,
                    SegmentSupport::SemiGeneralized(&refs),
                    &centroids,
                    k,
                    &cfg,
                )
            }
            Solver::Lt => {
                let corr =
                    lt_correspondences(&inputs.db, &sets, args.quantization_px, cfg.inlier_threshold_px)?;
                refine_with_segments(&result, SegmentSupport::Absolute(&corr), &centroids, k, &cfg)
            }
        };
    }
    Ok(ResultRecord {
        query_id: q.id.clone(),
        pos_err_m: None,
        rot_err_deg: None,
        num_inliers: result.num_inliers,
        pose: result.pose,
    })
}

pub fn run(args: &Args, seed: u64) -> Result<Outcome> {
    if args.topk == 0 {
        return Err(UsageError("--topk must be at least 1".into()).into());
    }
    let cfg = RansacConfig {
        inlier_threshold_px: args.threshold_px,
        seed,
        ..Default::default()
    };
    cfg.validate().map_err(|e| UsageError(e.to_string()))?;
    let inputs = load(args)?;
    let records: Vec<ResultRecord> = (0..inputs.queries.len())
        .into_par_iter()
        .map(|i| localize_one(args, &inputs, i, &cfg))
        .collect::<Result<_>>()?;
    write_results(&records, &args.out)?;
    let localized = records.iter().filter(|r| r.pose.is_some()).count();
    eprintln!("localized {localized} of {} queries", records.len());
    Ok(if localized == 0 {
        Outcome::NoneLocalized
    } else {
        Outcome::Done
    })
}
