//! Translation scale for the semi-generalized E5+1 solver.

use nalgebra::{Matrix3, Vector3};

use super::SolverError;
use crate::geometry::{Bearing, CameraPose};

/// Minimum sensitivity of the ray-to-ray distance to the scale.
pub const SCALE_SENSITIVITY_EPS: f64 = 1e-12;

/// Query pose implied by the relative pose `(rotation, scale * t_dir)` from the first reference.
pub fn query_pose_from_relative(
    rotation: &Matrix3<f64>,
    t_dir: &Vector3<f64>,
    scale: f64,
    pose_ref1: &CameraPose,
) -> CameraPose {
    CameraPose::new(*rotation, t_dir * scale).compose(pose_ref1)
}

/// Scale `s` of the relative translation that makes the query's ray meet the second reference's ray.
///
/// `rotation`/`t_dir` map first-reference camera coordinates into the query
/// frame. The query center moves linearly in `s`, and the distance between
/// the two (fixed-direction) rays is `|n·(c_q(s) - c_2)|` with `n` their
/// common normal, so the least-squares scale has a closed form.
pub fn solve_scale_e5p1(
    rotation: &Matrix3<f64>,
    t_dir: &Vector3<f64>,
    pose_ref1: &CameraPose,
    pose_ref2: &CameraPose,
    query_ray: &Bearing,
    ref2_ray: &Bearing,
) -> Result<f64, SolverError> {
    let r_query = rotation * pose_ref1.rotation;
    let c1 = pose_ref1.center().coords;
    let c2 = pose_ref2.center().coords;
    // c_q(s) = c1 - s * R_q^T t_dir
    let motion = r_query.transpose() * t_dir;
    let d_q = r_query.transpose() * query_ray.as_vector();
    let d_2 = pose_ref2.ray_to_world(ref2_ray.as_vector());
    let normal = d_q.cross(&d_2);
    let nn = normal.norm();
    if nn < SCALE_SENSITIVITY_EPS {
        return Err(SolverError::ScaleIndeterminate);
    }
    let normal = normal / nn;
    let slope = normal.dot(&motion);
    if slope.abs() < SCALE_SENSITIVITY_EPS {
        return Err(SolverError::ScaleIndeterminate);
    }
    Ok(normal.dot(&(c1 - c2)) / slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Scene {
        ref1: CameraPose,
        ref2: CameraPose,
        query: CameraPose,
        point: Point3,
    }

    fn random_scene(rng: &mut ChaCha8Rng) -> Scene {
        let target = Point3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let mut cam = || {
            let c = Point3::new(
                rng.random_range(-6.0..6.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-6.0..-3.0),
            );
            CameraPose::look_at(&c, &target, &Vector3::y())
        };
        let (ref1, ref2, query) = (cam(), cam(), cam());
        let point = Point3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        Scene {
            ref1,
            ref2,
            query,
            point,
        }
    }

    fn solve(s: &Scene) -> (Result<f64, SolverError>, f64) {
        let rel = s.query.compose(&s.ref1.inverse());
        let baseline = rel.translation.norm();
        let t_dir = rel.translation / baseline;
        let qr = Bearing::new(s.query.transform(&s.point)).unwrap();
        let r2 = Bearing::new(s.ref2.transform(&s.point)).unwrap();
        (
            solve_scale_e5p1(&rel.rotation, &t_dir, &s.ref1, &s.ref2, &qr, &r2),
            baseline,
        )
    }

    #[test]
    fn recovers_baseline_on_random_scenes() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..1000 {
            let s = random_scene(&mut rng);
            let (res, baseline) = solve(&s);
            let got = res.unwrap();
            assert!(((got - baseline) / baseline).abs() < 1e-8, "{got} vs {baseline}");
        }
    }

    #[test]
    fn scale_is_similarity_equivariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..100 {
            let s = random_scene(&mut rng);
            let k: f64 = rng.random_range(0.1..10.0);
            let scaled = |p: &CameraPose| CameraPose::new(p.rotation, p.translation * k);
            let big = Scene {
                ref1: scaled(&s.ref1),
                ref2: scaled(&s.ref2),
                query: scaled(&s.query),
                point: Point3::from(s.point.coords * k),
            };
            let a = solve(&s).0.unwrap();
            let b = solve(&big).0.unwrap() / k;
            assert!(((a - b) / a).abs() < 1e-9);
        }
    }

    #[test]
    fn motion_along_the_query_ray_is_indeterminate() {
        let ref1 = CameraPose::from_center(Matrix3::identity(), &Point3::new(0.0, 0.0, 0.0));
        let ref2 = CameraPose::from_center(Matrix3::identity(), &Point3::new(2.0, 0.0, 0.0));
        let rotation = Matrix3::identity();
        // Query center moves along -R^T t_dir = (0, 0, -1), i.e. along its own optical axis.
        let t_dir = Vector3::new(0.0, 0.0, 1.0);
        let qr = Bearing::new(Vector3::new(0.0, 0.0, 1.0)).unwrap();
        let r2 = Bearing::new(Vector3::new(-0.4, 0.0, 1.0)).unwrap();
        assert_eq!(
            solve_scale_e5p1(&rotation, &t_dir, &ref1, &ref2, &qr, &r2),
            Err(SolverError::ScaleIndeterminate)
        );
    }

    #[test]
    fn parallel_rays_are_indeterminate() {
        let ref1 = CameraPose::identity();
        let ref2 = CameraPose::from_center(Matrix3::identity(), &Point3::new(1.0, 0.0, 0.0));
        let b = Bearing::new(Vector3::z()).unwrap();
        assert_eq!(
            solve_scale_e5p1(&Matrix3::identity(), &Vector3::x(), &ref1, &ref2, &b, &b),
            Err(SolverError::ScaleIndeterminate)
        );
    }

    #[test]
    fn composed_pose_matches_ground_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let s = random_scene(&mut rng);
        let rel = s.query.compose(&s.ref1.inverse());
        let baseline = rel.translation.norm();
        let q = query_pose_from_relative(&rel.rotation, &(rel.translation / baseline), baseline, &s.ref1);
        assert!((q.rotation - s.query.rotation).norm() < 1e-12);
        assert!((q.translation - s.query.translation).norm() < 1e-12);
    }
}
