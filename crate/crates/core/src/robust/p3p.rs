use rand::seq::index;
use rand_chacha::ChaCha8Rng;

use super::{lo_ransac, refine_pose, LocalizationResult, PoseProblem, RansacConfig, RobustError};
use crate::geometry::{backproject, project, Bearing, CameraPose, Intrinsics, Point2, Point3};
use crate::solvers::p3p;

/// Squared reprojection errors, `+∞` for points behind the camera.
pub fn p3p_residuals_sq(pose: &CameraPose, correspondences: &[(Point2, Point3)], k: &Intrinsics) -> Vec<f64> {
    correspondences
        .iter()
        .map(|(x, world)| match project(pose, k, world) {
            Some(p) => (p - x).norm_squared(),
            None => f64::INFINITY,
        })
        .collect()
}

struct AbsoluteProblem<'a> {
    data: &'a [(Point2, Point3)],
    bearings: Vec<Bearing>,
    k: &'a Intrinsics,
    loss_scale: f64,
}

impl PoseProblem for AbsoluteProblem<'_> {
    fn num_data(&self) -> usize {
        self.data.len()
    }

    fn sample_size(&self) -> usize {
        3
    }

    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut Vec<usize>) -> bool {
        if self.data.len() < 4 {
            return false;
        }
        out.extend(index::sample(rng, self.data.len(), 3).iter());
        true
    }

    fn solve(&self, sample: &[usize], out: &mut Vec<CameraPose>) {
        let points = [0, 1, 2].map(|i| self.data[sample[i]].1);
        let rays = [0, 1, 2].map(|i| self.bearings[sample[i]]);
        if let Ok(poses) = p3p(&points, &rays) {
            out.extend(poses);
        }
    }

    fn residuals_sq(&self, pose: &CameraPose, out: &mut Vec<f64>) {
        out.clear();
        out.extend(p3p_residuals_sq(pose, self.data, self.k));
    }

    fn refine(&self, pose: &CameraPose, inliers: &[usize]) -> Option<CameraPose> {
        if inliers.len() < 4 {
            return None;
        }
        let subset: Vec<(Point2, Point3)> = inliers.iter().map(|&i| self.data[i]).collect();
        Some(refine_pose(pose, &subset, self.k, self.loss_scale))
    }
}

/// Absolute pose from 2D-3D correspondences with P3P inside LO-RANSAC.
pub fn ransac_p3p(
    correspondences: &[(Point2, Point3)],
    k: &Intrinsics,
    cfg: &RansacConfig,
) -> Result<LocalizationResult, RobustError> {
    ransac_p3p_traced(correspondences, k, cfg, None)
}

/// [`ransac_p3p`], recording the MSAC score of every generated hypothesis.
pub fn ransac_p3p_traced(
    correspondences: &[(Point2, Point3)],
    k: &Intrinsics,
    cfg: &RansacConfig,
    trace: Option<&mut Vec<f64>>,
) -> Result<LocalizationResult, RobustError> {
    cfg.validate()?;
    let problem = AbsoluteProblem {
        data: correspondences,
        bearings: correspondences.iter().map(|(x, _)| backproject(k, x)).collect(),
        k,
        loss_scale: cfg.inlier_threshold_px,
    };
    Ok(lo_ransac(&problem, cfg, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{position_error, rotation_error_deg};
    use nalgebra::{Rotation3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_distr::{Distribution, Normal};

    fn k() -> Intrinsics {
        Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480)
    }

    fn instance(seed: u64, n: usize, outlier_frac: f64, noise: f64) -> (CameraPose, Vec<(Point2, Point3)>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r = Rotation3::new(Vector3::new(
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
            rng.random_range(-0.5..0.5),
        ))
        .into_inner();
        let gt = CameraPose::from_center(r, &Point3::new(rng.random_range(-1.0..1.0), 0.0, -4.0));
        let normal = Normal::new(0.0, noise.max(1e-300)).unwrap();
        let n_out = (outlier_frac * n as f64).floor() as usize;
        let mut out = Vec::new();
        while out.len() < n {
            let cam = Vector3::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-1.5..1.5),
                rng.random_range(3.0..6.0),
            );
            let world = Point3::from(r.transpose() * (cam - gt.translation));
            let Some(mut px) = project(&gt, &k(), &world) else {
                continue;
            };
            if !k().contains(&px) {
                continue;
            }
            if noise > 0.0 {
                px.x += normal.sample(&mut rng);
                px.y += normal.sample(&mut rng);
            }
            out.push((px, world));
        }
        for p in out.iter_mut().take(n_out) {
            p.0 = Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
        }
        (gt, out)
    }

    #[test]
    fn noise_free_is_exact() {
        let (gt, data) = instance(1, 20, 0.0, 0.0);
        let res = ransac_p3p(&data, &k(), &RansacConfig::default()).unwrap();
        let pose = res.pose.unwrap();
        assert!(position_error(&pose, &gt) < 1e-7);
        assert!(rotation_error_deg(&pose, &gt) < 1e-7);
        assert_eq!(res.num_inliers, 20);
    }

    #[test]
    fn half_outliers() {
        let mut ok = 0;
        for seed in 0..200 {
            let (gt, data) = instance(100 + seed, 100, 0.5, 1.0);
            let cfg = RansacConfig {
                seed,
                ..Default::default()
            };
            let res = ransac_p3p(&data, &k(), &cfg).unwrap();
            if let Some(p) = res.pose {
                if position_error(&p, &gt) < 0.05 && rotation_error_deg(&p, &gt) < 0.5 {
                    ok += 1;
                }
            }
        }
        assert!(ok >= 190, "{ok}/200");
    }

    #[test]
    fn collinear_points_fail() {
        let k = k();
        let gt = CameraPose::identity();
        let data: Vec<(Point2, Point3)> = (0..20)
            .map(|i| {
                let x = Point3::new(-1.0 + 0.1 * i as f64, 0.2, 5.0);
                (project(&gt, &k, &x).unwrap(), x)
            })
            .collect();
        let res = ransac_p3p(&data, &k, &RansacConfig::default()).unwrap();
        assert!(res.pose.is_none());
        assert_eq!(res.num_correspondences, 20);
    }

    #[test]
    fn too_few_correspondences_fail() {
        let (_, data) = instance(3, 3, 0.0, 0.0);
        let res = ransac_p3p(&data, &k(), &RansacConfig::default()).unwrap();
        assert!(res.pose.is_none());
        assert_eq!(res.iterations_run, 0);
    }

    #[test]
    fn reported_score_is_minimal_and_mask_consistent() {
        let (_, data) = instance(4, 80, 0.4, 1.0);
        let cfg = RansacConfig::default();
        let mut trace = Vec::new();
        let res = ransac_p3p_traced(&data, &k(), &cfg, Some(&mut trace)).unwrap();
        assert!(!trace.is_empty());
        assert!(trace.iter().all(|s| res.score <= *s));
        let pose = res.pose.unwrap();
        let t2 = cfg.inlier_threshold_px.powi(2);
        let mask: Vec<bool> = p3p_residuals_sq(&pose, &data, &k())
            .iter()
            .map(|e| *e <= t2)
            .collect();
        assert_eq!(mask, res.inlier_mask);
    }

    #[test]
    fn deterministic_per_seed() {
        let (_, data) = instance(5, 60, 0.3, 1.0);
        let cfg = RansacConfig {
            seed: 9,
            ..Default::default()
        };
        let a = ransac_p3p(&data, &k(), &cfg).unwrap();
        let b = ransac_p3p(&data, &k(), &cfg).unwrap();
        assert_eq!(a, b);
    }
}
