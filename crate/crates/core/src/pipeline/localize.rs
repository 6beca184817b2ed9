use std::collections::HashSet;

use super::{build_tracks, MatchSet, PipelineError};
use crate::geometry::{
    backproject, project, triangulate_multiview, triangulate_two_view, triangulation_angle, Bearing,
    CameraPose, Intrinsics, Point2, Point3,
};
use crate::robust::{
    e5p1_residuals_sq, msac_score, p3p_residuals_sq, ransac_e5p1, ransac_p3p, refine_pose,
    LocalizationResult, RansacConfig, ReferenceMatches,
};
use crate::scene::SceneDatabase;

/// Tracks whose rays meet at a smaller angle are not triangulated.
pub const MIN_TRIANGULATION_ANGLE_DEG: f64 = 1.0;

/// Non-empty match sets as [`ReferenceMatches`], in input order.
///
/// This is the correspondence list [`localize_e5p1`] scores and the one its
/// inlier mask indexes.
pub fn reference_matches(
    db: &SceneDatabase,
    matches: &[MatchSet],
) -> Result<Vec<ReferenceMatches>, PipelineError> {
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    for set in matches.iter().filter(|s| !s.is_empty()) {
        let r = db
            .get(&set.id_b)
            .ok_or_else(|| PipelineError::UnknownImage(set.id_b.clone()))?;
        ids.insert(set.id_b.as_str());
        out.push(ReferenceMatches {
            pose: r.pose,
            intrinsics: r.intrinsics,
            matches: set.matches.iter().map(|m| (m.a, m.b)).collect(),
        });
    }
    if ids.len() < 2 {
        return Err(PipelineError::InsufficientReferences(ids.len()));
    }
    Ok(out)
}

fn with_pose(
    result: &LocalizationResult,
    pose: CameraPose,
    residuals_sq: &[f64],
    cfg: &RansacConfig,
) -> Option<LocalizationResult> {
    let (score, mask) = msac_score(residuals_sq, cfg.inlier_threshold_px);
    let num_inliers = mask.iter().filter(|m| **m).count();
    (score <= result.score && num_inliers >= cfg.min_inliers).then(|| LocalizationResult {
        pose: Some(pose),
        num_inliers,
        inlier_mask: mask,
        score,
        ..result.clone()
    })
}

/// Query pose from 2D-2D matches against at least two posed references (E5+1 path).
///
/// `matches` have the query on side `a`.
pub fn localize_e5p1(
    k_query: &Intrinsics,
    db: &SceneDatabase,
    matches: &[MatchSet],
    cfg: &RansacConfig,
) -> Result<LocalizationResult, PipelineError> {
    let refs = reference_matches(db, matches)?;
    let result = ransac_e5p1(&refs, k_query, cfg)?;
    Ok(crate::robust::polish_e5p1(result, &refs, k_query, cfg))
}

/// 2D-3D correspondences from locally triangulated tracks.
///
/// Each track is triangulated from its reference rays. Observations
/// reprojecting farther than `threshold_px` from their pixel are removed one
/// at a time, worst first. Tracks with fewer than two remaining observations
/// or a triangulation angle below [`MIN_TRIANGULATION_ANGLE_DEG`] are dropped.
pub fn lt_correspondences(
    db: &SceneDatabase,
    matches: &[MatchSet],
    quantization_px: f64,
    threshold_px: f64,
) -> Result<Vec<(Point2, Point3)>, PipelineError> {
    for set in matches {
        if db.get(&set.id_b).is_none() {
            return Err(PipelineError::UnknownImage(set.id_b.clone()));
        }
    }
    let min_angle = MIN_TRIANGULATION_ANGLE_DEG.to_radians();
    let mut out = Vec::new();
    for track in build_tracks(matches, quantization_px) {
        let mut obs: Vec<(CameraPose, Intrinsics, Bearing, Point2)> = track
            .observations
            .iter()
            .map(|(id, px)| {
                let r = db.get(id).expect("checked above");
                (r.pose, r.intrinsics, backproject(&r.intrinsics, px), *px)
            })
            .collect();
        let point = loop {
            let poses: Vec<CameraPose> = obs.iter().map(|o| o.0).collect();
            let rays: Vec<Bearing> = obs.iter().map(|o| o.2).collect();
            let Some(x) = triangulate_multiview(&poses, &rays) else {
                break None;
            };
            let errors: Vec<f64> = obs
                .iter()
                .map(|(pose, k, _, px)| project(pose, k, &x).map_or(f64::INFINITY, |p| (p - px).norm()))
                .collect();
            let (worst, err) = errors
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, e)| (i, *e))
                .expect("non-empty");
            if err <= threshold_px {
                break Some((x, poses));
            }
            if obs.len() <= 2 {
                break None;
            }
            obs.remove(worst);
        };
        if let Some((x, poses)) = point {
            if triangulation_angle(&poses, &x) >= min_angle {
                out.push((track.query_px, x));
            }
        }
    }
    Ok(out)
}

/// Query pose by local triangulation of query-keypoint tracks followed by P3P (LT path).
pub fn localize_lt(
    k_query: &Intrinsics,
    db: &SceneDatabase,
    matches: &[MatchSet],
    cfg: &RansacConfig,
    quantization_px: f64,
) -> Result<LocalizationResult, PipelineError> {
    reference_matches(db, matches)?;
    let corr = lt_correspondences(db, matches, quantization_px, cfg.inlier_threshold_px)?;
    let result = ransac_p3p(&corr, k_query, cfg)?;
    let Some(pose) = result.pose else {
        return Ok(result);
    };
    let inliers: Vec<(Point2, Point3)> = corr
        .iter()
        .zip(&result.inlier_mask)
        .filter(|(_, m)| **m)
        .map(|(c, _)| *c)
        .collect();
    let refined = refine_pose(&pose, &inliers, k_query, cfg.inlier_threshold_px);
    let residuals = p3p_residuals_sq(&refined, &corr, k_query);
    Ok(with_pose(&result, refined, &residuals, cfg).unwrap_or(result))
}

/// Correspondences a localization result was scored on.
#[derive(Debug, Clone, Copy)]
pub enum SegmentSupport<'a> {
    /// 2D-3D pairs (LT path).
    Absolute(&'a [(Point2, Point3)]),
    /// Per-reference 2D-2D matches (E5+1 path).
    SemiGeneralized(&'a [ReferenceMatches]),
}

impl SegmentSupport<'_> {
    fn residuals_sq(&self, pose: &CameraPose, k: &Intrinsics) -> Vec<f64> {
        match self {
            SegmentSupport::Absolute(c) => p3p_residuals_sq(pose, c, k),
            SegmentSupport::SemiGeneralized(r) => e5p1_residuals_sq(pose, r, k),
        }
    }

    fn inlier_points(&self, pose: &CameraPose, mask: &[bool], k: &Intrinsics) -> Vec<(Point2, Point3)> {
        match self {
            SegmentSupport::Absolute(c) => c.iter().zip(mask).filter(|(_, m)| **m).map(|(c, _)| *c).collect(),
            SegmentSupport::SemiGeneralized(refs) => {
                let mut out = Vec::new();
                let mut i = 0;
                for r in refs.iter() {
                    for (q, x) in &r.matches {
                        if mask.get(i).copied().unwrap_or(false) {
                            if let Some(p) = triangulate_two_view(
                                pose,
                                &r.pose,
                                &backproject(k, q),
                                &backproject(&r.intrinsics, x),
                            ) {
                                out.push((*q, p));
                            }
                        }
                        i += 1;
                    }
                }
                out
            }
        }
    }
}

/// Adds segment-centroid correspondences to the inlier set and re-refines the pose.
///
/// Centroid matches are triangulated against the current estimate. The
/// refined pose is kept only if its MSAC score over `support` does not
/// worsen and it still has at least `min_inliers` inliers.
pub fn refine_with_segments(
    result: &LocalizationResult,
    support: SegmentSupport<'_>,
    centroid_matches: &[ReferenceMatches],
    k_query: &Intrinsics,
    cfg: &RansacConfig,
) -> LocalizationResult {
    let Some(pose) = result.pose else {
        return result.clone();
    };
    let mut points = Vec::new();
    for r in centroid_matches {
        for (q, x) in &r.matches {
            if let Some(p) = triangulate_two_view(
                &pose,
                &r.pose,
                &backproject(k_query, q),
                &backproject(&r.intrinsics, x),
            ) {
                points.push((*q, p));
            }
        }
    }
    if points.is_empty() {
        return result.clone();
    }
    let base_residuals = support.residuals_sq(&pose, k_query);
    let (base_score, _) = msac_score(&base_residuals, cfg.inlier_threshold_px);
    let baseline = LocalizationResult {
        score: base_score,
        ..result.clone()
    };
    points.extend(support.inlier_points(&pose, &result.inlier_mask, k_query));
    let refined = refine_pose(&pose, &points, k_query, cfg.inlier_threshold_px);
    let residuals = support.residuals_sq(&refined, k_query);
    with_pose(&baseline, refined, &residuals, cfg).unwrap_or_else(|| result.clone())
}
