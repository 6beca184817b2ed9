use std::ops::Range;

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use nalgebra::DVector;

use super::refine::{levenberg_marquardt, numeric_jacobian};
use super::{lo_ransac, LocalizationResult, PoseProblem, RansacConfig, RobustError};
use crate::geometry::{backproject, project, triangulate_two_view, Bearing, CameraPose, Intrinsics, Point2};
use crate::solvers::{
    decompose_essential, essential_5pt, query_pose_from_relative, solve_scale_e5p1, BearingPair,
};

/// Matches between the query and one posed reference image, as `(query_px, reference_px)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMatches {
    pub pose: CameraPose,
    pub intrinsics: Intrinsics,
    pub matches: Vec<(Point2, Point2)>,
}

const JACOBIAN_STEP: f64 = 1e-6;

struct Observation {
    reference: usize,
    query_px: Point2,
    query_ray: Bearing,
    ref_ray: Bearing,
}

struct SemiGeneralizedProblem<'a> {
    refs: &'a [ReferenceMatches],
    k: &'a Intrinsics,
    obs: Vec<Observation>,
    groups: Vec<Range<usize>>,
    // Total matches in references that can seed a five-point sample.
    seedable: usize,
    loss_scale: f64,
}

impl<'a> SemiGeneralizedProblem<'a> {
    fn new(refs: &'a [ReferenceMatches], k: &'a Intrinsics, loss_scale: f64) -> Self {
        let mut obs = Vec::new();
        let mut groups = Vec::with_capacity(refs.len());
        for (r, m) in refs.iter().enumerate() {
            let start = obs.len();
            obs.extend(m.matches.iter().map(|(q, x)| Observation {
                reference: r,
                query_px: *q,
                query_ray: backproject(k, q),
                ref_ray: backproject(&m.intrinsics, x),
            }));
            groups.push(start..obs.len());
        }
        let seedable = groups.iter().filter(|g| g.len() >= 5).map(|g| g.len()).sum();
        Self {
            refs,
            k,
            obs,
            groups,
            seedable,
            loss_scale,
        }
    }

    fn residual_sq(&self, pose: &CameraPose, o: &Observation) -> f64 {
        let ref_pose = &self.refs[o.reference].pose;
        triangulate_two_view(pose, ref_pose, &o.query_ray, &o.ref_ray)
            .and_then(|x| project(pose, self.k, &x))
            .map_or(f64::INFINITY, |p| (p - o.query_px).norm_squared())
    }

    // Signed pixel distance from the query keypoint to the epipolar line of the reference ray.
    fn epipolar_residual(&self, pose: &CameraPose, o: &Observation) -> f64 {
        let ref_pose = &self.refs[o.reference].pose;
        let r_rel = pose.rotation * ref_pose.rotation.transpose();
        let t_rel = pose.translation - r_rel * ref_pose.translation;
        let l = t_rel.cross(&(r_rel * o.ref_ray.as_vector()));
        let k = self.k;
        let (a, b) = (l.x / k.fx, l.y / k.fy);
        let c = l.z - a * k.cx - b * k.cy;
        let norm = a.hypot(b);
        if norm <= f64::MIN_POSITIVE {
            return 0.0;
        }
        (a * o.query_px.x + b * o.query_px.y + c) / norm
    }
}

impl PoseProblem for SemiGeneralizedProblem<'_> {
    fn num_data(&self) -> usize {
        self.obs.len()
    }

    fn sample_size(&self) -> usize {
        6
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut Vec<usize>) -> bool {
        if self.seedable == 0 {
            return false;
        }
        let mut pick = rng.random_range(0..self.seedable);
        let Some(first) = self.groups.iter().filter(|g| g.len() >= 5).find(|g| {
            if pick < g.len() {
                true
            } else {
                pick -= g.len();
                false
            }
        }) else {
            return false;
        };
        let others = self.obs.len() - first.len();
        if others == 0 {
            return false;
        }
        out.extend(index::sample(rng, first.len(), 5).iter().map(|i| first.start + i));
        let j = rng.random_range(0..others);
        out.push(if j < first.start { j } else { j + first.len() });
        true
    }

    fn solve(&self, sample: &[usize], out: &mut Vec<CameraPose>) {
        let five: [&Observation; 5] = std::array::from_fn(|i| &self.obs[sample[i]]);
        let sixth = &self.obs[sample[5]];
        let ref1 = &self.refs[five[0].reference].pose;
        let ref2 = &self.refs[sixth.reference].pose;
        let pairs = five.map(|o| BearingPair::new(o.ref_ray, o.query_ray));
        let Ok(candidates) = essential_5pt(&pairs) else {
            return;
        };
        for e in candidates {
            let Ok((rotation, t_dir)) = decompose_essential(&e, &pairs) else {
                continue;
            };
            let Ok(scale) = solve_scale_e5p1(&rotation, &t_dir, ref1, ref2, &sixth.query_ray, &sixth.ref_ray)
            else {
                continue;
            };
            if !(scale > 0.0 && scale.is_finite()) {
                continue;
            }
            out.push(query_pose_from_relative(&rotation, &t_dir, scale, ref1));
        }
    }

    fn residuals_sq(&self, pose: &CameraPose, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.obs.iter().map(|o| self.residual_sq(pose, o)));
    }

    fn refine(&self, pose: &CameraPose, inliers: &[usize]) -> Option<CameraPose> {
        if inliers.len() < 6 {
            return None;
        }
        let residuals = |p: &CameraPose| {
            DVector::from_iterator(
                inliers.len(),
                inliers.iter().map(|&i| self.epipolar_residual(p, &self.obs[i])),
            )
        };
        Some(levenberg_marquardt(
            pose,
            1,
            residuals,
            |p| numeric_jacobian(p, inliers.len(), residuals, JACOBIAN_STEP),
            self.loss_scale,
        ))
    }
}

/// Squared reprojection errors of query pixels against points midpoint-triangulated
/// between the query ray under `pose` and the matched reference ray.
pub fn e5p1_residuals_sq(pose: &CameraPose, refs: &[ReferenceMatches], k_query: &Intrinsics) -> Vec<f64> {
    let problem = SemiGeneralizedProblem::new(refs, k_query, 1.0);
    let mut out = Vec::new();
    problem.residuals_sq(pose, &mut out);
    out
}

/// Metric query pose from 2D-2D matches against posed references (E5+1 in LO-RANSAC).
///
/// Each sample takes five matches from one reference and a sixth from a
/// different one. Correspondences are ordered reference by reference in the
/// result's inlier mask.
pub fn ransac_e5p1(
    refs: &[ReferenceMatches],
    k_query: &Intrinsics,
    cfg: &RansacConfig,
) -> Result<LocalizationResult, RobustError> {
    ransac_e5p1_traced(refs, k_query, cfg, None)
}

/// [`ransac_e5p1`], recording the MSAC score of every generated hypothesis.
pub fn ransac_e5p1_traced(
    refs: &[ReferenceMatches],
    k_query: &Intrinsics,
    cfg: &RansacConfig,
    trace: Option<&mut Vec<f64>>,
) -> Result<LocalizationResult, RobustError> {
    cfg.validate()?;
    let problem = SemiGeneralizedProblem::new(refs, k_query, cfg.inlier_threshold_px);
    Ok(lo_ransac(&problem, cfg, trace))
}

/// Re-runs the local optimization on the inliers of `result`, keeping it only if the score does not worsen.
pub(crate) fn polish_e5p1(
    result: LocalizationResult,
    refs: &[ReferenceMatches],
    k_query: &Intrinsics,
    cfg: &RansacConfig,
) -> LocalizationResult {
    let Some(pose) = result.pose else {
        return result;
    };
    let problem = SemiGeneralizedProblem::new(refs, k_query, cfg.inlier_threshold_px);
    let inliers: Vec<usize> = (0..result.inlier_mask.len())
        .filter(|&i| result.inlier_mask[i])
        .collect();
    let Some(refined) = problem.refine(&pose, &inliers) else {
        return result;
    };
    let mut buf = Vec::new();
    problem.residuals_sq(&refined, &mut buf);
    let (score, mask) = super::msac_score(&buf, cfg.inlier_threshold_px);
    let num_inliers = mask.iter().filter(|m| **m).count();
    if score <= result.score && num_inliers >= cfg.min_inliers {
        LocalizationResult {
            pose: Some(refined),
            num_inliers,
            inlier_mask: mask,
            score,
            ..result
        }
    } else {
        result
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{position_error, rotation_error_deg, Point3};
    use nalgebra::Vector3;
    use rand::SeedableRng;
    use rand_distr::{Distribution, Normal};

    fn k() -> Intrinsics {
        Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480)
    }

    // Camera on a ring of radius 5 around the unit cube, looking inward.
    fn camera(rng: &mut ChaCha8Rng, azimuth: f64) -> CameraPose {
        let c = Point3::new(
            5.0 * azimuth.cos(),
            rng.random_range(-0.5..0.5),
            5.0 * azimuth.sin(),
        );
        let target = Point3::new(
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
            rng.random_range(-0.3..0.3),
        );
        CameraPose::look_at(&c, &target, &Vector3::y())
    }

    /// `per_ref` matches to each of `num_refs` references alternating around the query.
    fn instance(
        seed: u64,
        num_refs: usize,
        per_ref: usize,
        outlier_frac: f64,
        noise: f64,
    ) -> (CameraPose, Vec<ReferenceMatches>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a0: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        let query = camera(&mut rng, a0);
        let normal = Normal::new(0.0, noise.max(1e-300)).unwrap();
        let mut refs = Vec::new();
        for i in 0..num_refs {
            let side = if i % 2 == 0 { 1.0 } else { -1.0 };
            let offset = rng.random_range(25f64..40.0).to_radians() * (1 + i / 2) as f64;
            let pose = camera(&mut rng, a0 + side * offset);
            let mut matches = Vec::new();
            while matches.len() < per_ref {
                let x = Point3::new(
                    rng.random_range(-2.5..2.5),
                    rng.random_range(-2.5..2.5),
                    rng.random_range(-2.5..2.5),
                );
                let (Some(mut q), Some(mut r)) = (project(&query, &k(), &x), project(&pose, &k(), &x)) else {
                    continue;
                };
                if !(k().contains(&q) && k().contains(&r)) {
                    continue;
                }
                if noise > 0.0 {
                    q.x += normal.sample(&mut rng);
                    q.y += normal.sample(&mut rng);
                    r.x += normal.sample(&mut rng);
                    r.y += normal.sample(&mut rng);
                }
                matches.push((q, r));
            }
            let n_out = (outlier_frac * per_ref as f64).floor() as usize;
            for m in matches.iter_mut().take(n_out) {
                m.0 = Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
                m.1 = Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            }
            refs.push(ReferenceMatches {
                pose,
                intrinsics: k(),
                matches,
            });
        }
        (query, refs)
    }

    #[test]
    fn noise_free_is_exact() {
        for seed in 0..20 {
            let (gt, refs) = instance(seed, 2, 25, 0.0, 0.0);
            let res = ransac_e5p1(&refs, &k(), &RansacConfig::default()).unwrap();
            let pose = res.pose.unwrap();
            assert!(
                position_error(&pose, &gt) < 1e-6,
                "{}",
                position_error(&pose, &gt)
            );
            assert!(rotation_error_deg(&pose, &gt) < 1e-5);
            assert_eq!(res.num_inliers, 50);
        }
    }

    #[test]
    fn thirty_percent_outliers() {
        let mut ok = 0;
        for seed in 0..200 {
            let (gt, refs) = instance(1000 + seed, 3, 100, 0.3, 1.0);
            let cfg = RansacConfig {
                seed,
                ..Default::default()
            };
            let res = ransac_e5p1(&refs, &k(), &cfg).unwrap();
            if let Some(p) = res.pose {
                if position_error(&p, &gt) < 0.05 && rotation_error_deg(&p, &gt) < 0.5 {
                    ok += 1;
                }
            }
        }
        assert!(ok >= 190, "{ok}/200");
    }

    #[test]
    fn four_matches_fail() {
        let (_, mut refs) = instance(7, 2, 2, 0.0, 0.0);
        refs[1].matches.truncate(2);
        let res = ransac_e5p1(&refs, &k(), &RansacConfig::default()).unwrap();
        assert!(res.pose.is_none());
        assert_eq!(res.num_correspondences, 4);
    }

    #[test]
    fn single_reference_fails() {
        let (_, refs) = instance(8, 1, 30, 0.0, 0.0);
        let res = ransac_e5p1(&refs, &k(), &RansacConfig::default()).unwrap();
        assert!(res.pose.is_none());
    }

    #[test]
    fn reported_score_is_minimal_and_mask_consistent() {
        let (_, refs) = instance(9, 3, 40, 0.3, 1.0);
        let cfg = RansacConfig::default();
        let mut trace = Vec::new();
        let res = ransac_e5p1_traced(&refs, &k(), &cfg, Some(&mut trace)).unwrap();
        assert!(trace.iter().all(|s| res.score <= *s));
        let pose = res.pose.unwrap();
        let t2 = cfg.inlier_threshold_px.powi(2);
        let mask: Vec<bool> = e5p1_residuals_sq(&pose, &refs, &k())
            .iter()
            .map(|e| *e <= t2)
            .collect();
        assert_eq!(mask, res.inlier_mask);
    }

    #[test]
    fn polishing_never_worsens() {
        for seed in 0..20 {
            let (_, refs) = instance(2000 + seed, 3, 40, 0.3, 1.0);
            let cfg = RansacConfig::default();
            let res = ransac_e5p1(&refs, &k(), &cfg).unwrap();
            let polished = polish_e5p1(res.clone(), &refs, &k(), &cfg);
            assert!(polished.score <= res.score);
        }
    }
}
