//! Calibrated pinhole cameras, rigid poses, triangulation and pose-error metrics.
//!
//! Poses map world points into the camera frame: `x_cam = R * x_world + t`.
//! The camera center is therefore `c = -R^T * t`. No lens distortion is
//! modelled; inputs are assumed to be undistorted upstream.

use nalgebra::{DMatrix, Matrix3, Matrix3x4, Rotation3, UnitQuaternion, Vector3, SVD};

pub type Point2 = nalgebra::Point2<f64>;
pub type Point3 = nalgebra::Point3<f64>;

/// Minimum angle between two rays for a two-view triangulation (radians).
pub const PARALLEL_RAY_ANGLE: f64 = 1e-6;
/// Ratio of the two smallest singular values above which a multi-view DLT is rank deficient.
pub const DLT_SINGULAR_RATIO: f64 = 0.99;
/// Relative size of the third singular value below which the DLT system has a 2-D null space.
const DLT_RANK_EPS: f64 = 1e-12;

/// Rigid world-to-camera transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for CameraPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        Self::new(Matrix3::identity(), Vector3::zeros())
    }

    /// Pose of a camera with orientation `rotation` placed at world position `center`.
    pub fn from_center(rotation: Matrix3<f64>, center: &Point3) -> Self {
        Self::new(rotation, -(rotation * center.coords))
    }

    /// Camera looking from `center` towards `target`, with image `y` pointing roughly along `down`.
    pub fn look_at(center: &Point3, target: &Point3, down: &Vector3<f64>) -> Self {
        let z = (target - center).normalize();
        let x = down.cross(&z).normalize();
        let y = z.cross(&x);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        Self::from_center(rotation, center)
    }

    pub fn from_quaternion(q: &UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self::new(q.to_rotation_matrix().into_inner(), translation)
    }

    pub fn quaternion(&self) -> UnitQuaternion<f64> {
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(self.rotation))
    }

    pub fn center(&self) -> Point3 {
        Point3::from(-(self.rotation.transpose() * self.translation))
    }

    pub fn transform(&self, x: &Point3) -> Vector3<f64> {
        self.rotation * x.coords + self.translation
    }

    /// World-frame direction of a camera-frame vector.
    pub fn ray_to_world(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * v
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &CameraPose) -> CameraPose {
        CameraPose::new(
            self.rotation * other.rotation,
            self.rotation * other.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> CameraPose {
        let rt = self.rotation.transpose();
        CameraPose::new(rt, -(rt * self.translation))
    }

    pub fn projection_matrix(&self) -> Matrix3x4<f64> {
        let mut p = Matrix3x4::zeros();
        p.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        p.set_column(3, &self.translation);
        p
    }

    /// Checks `R^T R = I` and `det R = +1` within `tol`.
    pub fn is_valid(&self, tol: f64) -> bool {
        let ortho = (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm();
        ortho <= tol
            && (self.rotation.determinant() - 1.0).abs() <= tol
            && self.translation.iter().all(|v| v.is_finite())
    }
}

/// Pinhole intrinsics. Pixel coordinates have their origin at the top-left
/// pixel center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Self {
        Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.fx > 0.0
            && self.fy > 0.0
            && self.fx.is_finite()
            && self.fy.is_finite()
            && self.cx >= 0.0
            && self.cy >= 0.0
            && self.cx < self.width as f64
            && self.cy < self.height as f64
    }

    pub fn contains(&self, p: &Point2) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width as f64 && p.y <= self.height as f64
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }
}

/// Unit-norm viewing direction in a camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bearing(Vector3<f64>);

impl Bearing {
    /// Normalizes `v`. Returns `None` for zero or non-finite input.
    pub fn new(v: Vector3<f64>) -> Option<Self> {
        let n = v.norm();
        if n > 0.0 && n.is_finite() {
            Some(Self(v / n))
        } else {
            None
        }
    }

    pub fn from_normalized_unchecked(v: Vector3<f64>) -> Self {
        Self(v)
    }

    pub fn as_vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn into_inner(self) -> Vector3<f64> {
        self.0
    }
}

/// Projects a world point into pixels. `None` when the point is not in front of the camera.
pub fn project(pose: &CameraPose, k: &Intrinsics, x: &Point3) -> Option<Point2> {
    project_camera(k, &pose.transform(x))
}

/// Projects a camera-frame point.
pub fn project_camera(k: &Intrinsics, p: &Vector3<f64>) -> Option<Point2> {
    if p.z <= 0.0 {
        return None;
    }
    Some(Point2::new(k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy))
}

pub fn backproject(k: &Intrinsics, u: &Point2) -> Bearing {
    let v = Vector3::new((u.x - k.cx) / k.fx, (u.y - k.cy) / k.fy, 1.0);
    Bearing(v / v.norm())
}

/// Midpoint of the shortest segment between the world rays of two bearings.
///
/// Returns `None` when the rays are closer than [`PARALLEL_RAY_ANGLE`] to
/// parallel or when either closest point lies at non-positive depth.
pub fn triangulate_two_view(
    pose_a: &CameraPose,
    pose_b: &CameraPose,
    ray_a: &Bearing,
    ray_b: &Bearing,
) -> Option<Point3> {
    let ca = pose_a.center().coords;
    let cb = pose_b.center().coords;
    let da = pose_a.ray_to_world(ray_a.as_vector());
    let db = pose_b.ray_to_world(ray_b.as_vector());
    // Anti-parallel rays are rejected as well.
    if da.cross(&db).norm() < PARALLEL_RAY_ANGLE.sin() {
        return None;
    }
    // Solve [da, -db] [la, lb]^T ~= cb - ca in the least-squares sense.
    let w = cb - ca;
    let b = da.dot(&db);
    let d = da.dot(&w);
    let e = db.dot(&w);
    let denom = 1.0 - b * b;
    let la = (d - b * e) / denom;
    let lb = (b * d - e) / denom;
    if la <= 0.0 || lb <= 0.0 {
        return None;
    }
    let pa = ca + da * la;
    let pb = cb + db * lb;
    Some(Point3::from((pa + pb) * 0.5))
}

/// Linear triangulation from two or more views.
///
/// Each observation contributes the cross-product constraint
/// `b × (R X + t) = 0`. The system is rejected as degenerate when its null
/// space is not one-dimensional or when the solution is behind any camera.
pub fn triangulate_multiview(poses: &[CameraPose], rays: &[Bearing]) -> Option<Point3> {
    if poses.len() < 2 || poses.len() != rays.len() {
        return None;
    }
    let mut a = DMatrix::<f64>::zeros(3 * poses.len(), 4);
    for (i, (pose, ray)) in poses.iter().zip(rays).enumerate() {
        let rows = ray.as_vector().cross_matrix() * pose.projection_matrix();
        a.view_mut((3 * i, 0), (3, 4)).copy_from(&rows);
    }
    let svd = SVD::new(a, false, true);
    let v_t = svd.v_t?;
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let s: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    if s[0] <= 0.0 || s[2] <= DLT_RANK_EPS * s[0] || s[3] / s[2] > DLT_SINGULAR_RATIO {
        return None;
    }
    let h = v_t.row(order[3]).transpose();
    if h[3].abs() < f64::EPSILON * h.norm() {
        return None;
    }
    let x = Point3::new(h[0] / h[3], h[1] / h[3], h[2] / h[3]);
    if poses.iter().any(|p| p.transform(&x).z <= 0.0) {
        return None;
    }
    Some(x)
}

/// Largest angle (radians) between the viewing rays from the camera centers to `x`.
pub fn triangulation_angle(poses: &[CameraPose], x: &Point3) -> f64 {
    let dirs: Vec<Vector3<f64>> = poses.iter().map(|p| (x - p.center()).normalize()).collect();
    let mut best: f64 = 0.0;
    for i in 0..dirs.len() {
        for j in i + 1..dirs.len() {
            let a = dirs[i].cross(&dirs[j]).norm().atan2(dirs[i].dot(&dirs[j]));
            best = best.max(a);
        }
    }
    best
}

/// Distance between camera centers.
pub fn position_error(est: &CameraPose, gt: &CameraPose) -> f64 {
    (est.center() - gt.center()).norm()
}

/// Angle of the relative rotation `R_gt^T R_est`, in degrees.
pub fn rotation_error_deg(est: &CameraPose, gt: &CameraPose) -> f64 {
    let r = gt.rotation.transpose() * est.rotation;
    let cos = (r.trace() - 1.0) / 2.0;
    let sin = 0.5
        * Vector3::new(
            r[(2, 1)] - r[(1, 2)],
            r[(0, 2)] - r[(2, 0)],
            r[(1, 0)] - r[(0, 1)],
        )
        .norm();
    sin.atan2(cos).to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_pose(rng: &mut ChaCha8Rng) -> CameraPose {
        let axis = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let r = Rotation3::new(axis * rng.random_range(0.0..1.5));
        let t = Vector3::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
        );
        CameraPose::new(r.into_inner(), t)
    }

    #[test]
    fn project_trivial_cases() {
        let id = CameraPose::identity();
        let k1 = Intrinsics::new(1.0, 1.0, 0.0, 0.0, 10, 10);
        assert_eq!(
            project(&id, &k1, &Point3::new(0.0, 0.0, 1.0)),
            Some(Point2::new(0.0, 0.0))
        );
        let k = Intrinsics::new(100.0, 100.0, 50.0, 50.0, 100, 100);
        let u = project(&id, &k, &Point3::new(0.1, 0.0, 1.0)).unwrap();
        assert_relative_eq!(u.x, 60.0, epsilon = 1e-12);
        assert_relative_eq!(u.y, 50.0, epsilon = 1e-12);
        assert_eq!(project(&id, &k, &Point3::new(0.0, 0.0, -1.0)), None);
        assert_eq!(project(&id, &k, &Point3::new(0.0, 0.0, 0.0)), None);
    }

    #[test]
    fn backproject_trivial_cases() {
        let k1 = Intrinsics::new(1.0, 1.0, 0.0, 0.0, 10, 10);
        let b = backproject(&k1, &Point2::new(0.0, 0.0));
        assert_relative_eq!(*b.as_vector(), Vector3::z(), epsilon = 1e-15);
        let k = Intrinsics::new(100.0, 100.0, 50.0, 50.0, 200, 100);
        let b = backproject(&k, &Point2::new(150.0, 50.0));
        assert_relative_eq!(
            *b.as_vector(),
            Vector3::new(1.0, 0.0, 1.0).normalize(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn project_backproject_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = Intrinsics::new(520.0, 515.0, 320.0, 240.0, 640, 480);
        for _ in 0..1000 {
            let u = Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            let b = backproject(&k, &u);
            assert!((b.as_vector().norm() - 1.0).abs() < 1e-12);
            let x = Point3::from(b.as_vector() / b.as_vector().z);
            let v = project(&CameraPose::identity(), &k, &x).unwrap();
            assert!((v - u).norm() < 1e-9);
        }
        // Random pose: place the point along the backprojected ray and reproject.
        for _ in 0..1000 {
            let pose = random_pose(&mut rng);
            let u = Point2::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0));
            let depth = rng.random_range(0.5..20.0);
            let xc = backproject(&k, &u).into_inner() * depth;
            let xw = Point3::from(pose.rotation.transpose() * (xc - pose.translation));
            let v = project(&pose, &k, &xw).unwrap();
            assert!((v - u).norm() < 1e-9);
        }
    }

    #[test]
    fn projection_is_invariant_to_joint_rigid_motion() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let k = Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480);
        for _ in 0..100 {
            let pose = random_pose(&mut rng);
            let g = random_pose(&mut rng);
            let x =
                Point3::from(pose.center().coords + pose.rotation.transpose() * Vector3::new(0.1, -0.2, 3.0));
            let moved_pose = pose.compose(&g.inverse());
            let moved_x = Point3::from(g.transform(&x));
            let a = project(&pose, &k, &x).unwrap();
            let b = project(&moved_pose, &k, &moved_x).unwrap();
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let p = random_pose(&mut rng);
            assert!(p.is_valid(1e-9));
            let id = p.compose(&p.inverse());
            assert!((id.rotation - Matrix3::identity()).norm() < 1e-9);
            assert!(id.translation.norm() < 1e-9);
        }
    }

    #[test]
    fn two_view_exact_intersection() {
        let a = CameraPose::from_center(Matrix3::identity(), &Point3::new(-1.0, 0.0, 0.0));
        let b = CameraPose::from_center(Matrix3::identity(), &Point3::new(1.0, 0.0, 0.0));
        let x = Point3::new(0.0, 0.0, 5.0);
        let ra = Bearing::new(a.transform(&x)).unwrap();
        let rb = Bearing::new(b.transform(&x)).unwrap();
        let y = triangulate_two_view(&a, &b, &ra, &rb).unwrap();
        assert!((y - x).norm() < 1e-9);
    }

    #[test]
    fn two_view_parallel_rays_are_degenerate() {
        let a = CameraPose::from_center(Matrix3::identity(), &Point3::new(0.0, 0.0, 0.0));
        let b = CameraPose::from_center(Matrix3::identity(), &Point3::new(0.0, 0.0, 1.0));
        let r = Bearing::new(Vector3::z()).unwrap();
        assert!(triangulate_two_view(&a, &b, &r, &r).is_none());
    }

    #[test]
    fn two_view_point_behind_is_degenerate() {
        let a = CameraPose::from_center(Matrix3::identity(), &Point3::new(-1.0, 0.0, 0.0));
        let b = CameraPose::from_center(Matrix3::identity(), &Point3::new(1.0, 0.0, 0.0));
        // Rays diverge in front, meet behind.
        let ra = Bearing::new(Vector3::new(-0.2, 0.0, 1.0)).unwrap();
        let rb = Bearing::new(Vector3::new(0.2, 0.0, 1.0)).unwrap();
        assert!(triangulate_two_view(&a, &b, &ra, &rb).is_none());
    }

    #[test]
    fn two_view_random_reprojection_and_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480);
        let mut n = 0;
        while n < 1000 {
            let a = random_pose(&mut rng);
            let b = random_pose(&mut rng);
            let x = Point3::from(
                a.center().coords
                    + a.rotation.transpose()
                        * Vector3::new(
                            rng.random_range(-1.0..1.0),
                            rng.random_range(-1.0..1.0),
                            rng.random_range(2.0..8.0),
                        ),
            );
            if b.transform(&x).z <= 0.1 {
                continue;
            }
            let ra = Bearing::new(a.transform(&x)).unwrap();
            let rb = Bearing::new(b.transform(&x)).unwrap();
            let Some(y) = triangulate_two_view(&a, &b, &ra, &rb) else {
                continue;
            };
            let z = triangulate_two_view(&b, &a, &rb, &ra).unwrap();
            assert!((y - z).norm() < 1e-9);
            for p in [&a, &b] {
                let e = project(p, &k, &y).unwrap() - project(p, &k, &x).unwrap();
                assert!(e.norm() < 1e-7, "reprojection {}", e.norm());
            }
            n += 1;
        }
    }

    #[test]
    fn multiview_recovers_point() {
        let x = Point3::new(1.0, 2.0, 10.0);
        let centers = [
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(2.0, 0.0, 0.5),
            Point3::new(-1.0, 1.5, -0.5),
        ];
        let poses: Vec<CameraPose> = centers
            .iter()
            .map(|c| CameraPose::look_at(c, &Point3::new(1.0, 2.0, 10.0), &Vector3::y()))
            .collect();
        let rays: Vec<Bearing> = poses
            .iter()
            .map(|p| Bearing::new(p.transform(&x)).unwrap())
            .collect();
        let y = triangulate_multiview(&poses, &rays).unwrap();
        assert!((y - x).norm() < 1e-8);
        let two = triangulate_multiview(&poses[..2], &rays[..2]).unwrap();
        let mid = triangulate_two_view(&poses[0], &poses[1], &rays[0], &rays[1]).unwrap();
        assert!((two - mid).norm() < 1e-6);
    }

    #[test]
    fn multiview_collinear_is_degenerate() {
        let x = Point3::new(0.0, 0.0, 10.0);
        let poses: Vec<CameraPose> = [0.0, 1.0, 2.0]
            .iter()
            .map(|z| CameraPose::from_center(Matrix3::identity(), &Point3::new(0.0, 0.0, *z)))
            .collect();
        let rays: Vec<Bearing> = poses
            .iter()
            .map(|p| Bearing::new(p.transform(&x)).unwrap())
            .collect();
        assert!(triangulate_multiview(&poses, &rays).is_none());
    }

    #[test]
    fn error_metrics() {
        let gt = CameraPose::identity();
        assert_eq!(position_error(&gt, &gt), 0.0);
        assert_eq!(rotation_error_deg(&gt, &gt), 0.0);
        let est = CameraPose::new(Matrix3::identity(), Vector3::new(0.0, 3.0, 4.0));
        assert_relative_eq!(position_error(&est, &gt), 5.0, epsilon = 1e-12);
        for axis in [
            Vector3::x(),
            Vector3::y(),
            Vector3::new(1.0, 2.0, -3.0).normalize(),
        ] {
            let r = Rotation3::new(axis * 10f64.to_radians()).into_inner();
            let est = CameraPose::new(r, Vector3::zeros());
            assert!((rotation_error_deg(&est, &gt) - 10.0).abs() < 1e-9);
        }
    }

    #[test]
    fn error_metric_invariances() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let a = random_pose(&mut rng);
            let b = random_pose(&mut rng);
            let g = random_pose(&mut rng);
            let pe = position_error(&a, &b);
            let pe_moved = position_error(&a.compose(&g), &b.compose(&g));
            assert!((pe - pe_moved).abs() < 1e-9);
            let re = rotation_error_deg(&a, &b);
            assert!((re - rotation_error_deg(&b, &a)).abs() < 1e-9);
            assert!((0.0..=180.0).contains(&re));
        }
    }
}
