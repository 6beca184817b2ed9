//! Closed-form similarity alignment of two paired point sets.

use nalgebra::{Matrix3, Vector3, SVD};

use super::SolverError;
use crate::geometry::{CameraPose, Point3};

/// `x -> scale * R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, x: &Point3) -> Point3 {
        Point3::from(self.scale * (self.rotation * x.coords) + self.translation)
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SimilarityTransform) -> SimilarityTransform {
        SimilarityTransform {
            scale: self.scale * other.scale,
            rotation: self.rotation * other.rotation,
            translation: self.scale * (self.rotation * other.translation) + self.translation,
        }
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let rt = self.rotation.transpose();
        SimilarityTransform {
            scale: 1.0 / self.scale,
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
        }
    }

    /// Re-expresses a world-to-camera pose in the transformed world frame,
    /// rescaling camera coordinates so the result stays metric in the new frame.
    pub fn transform_pose(&self, pose: &CameraPose) -> CameraPose {
        let rotation = pose.rotation * self.rotation.transpose();
        let translation = self.scale * pose.translation - rotation * self.translation;
        CameraPose::new(rotation, translation)
    }
}

/// Least-squares similarity minimizing `Σ |s R x_i + t - y_i|²` (Umeyama).
pub fn align_similarity(source: &[Point3], target: &[Point3]) -> Result<SimilarityTransform, SolverError> {
    if source.len() != target.len() || source.len() < 3 {
        return Err(SolverError::DegenerateConfiguration);
    }
    let n = source.len() as f64;
    let mu_x = source.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mu_y = target.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n;
    let mut cov = Matrix3::zeros();
    let mut src_scatter = Matrix3::zeros();
    let mut var_x = 0.0;
    for (x, y) in source.iter().zip(target) {
        let dx = x.coords - mu_x;
        let dy = y.coords - mu_y;
        cov += dy * dx.transpose();
        src_scatter += dx * dx.transpose();
        var_x += dx.norm_squared();
    }
    cov /= n;
    var_x /= n;

    // Collinear (or coincident) sources leave the rotation about the line free.
    let mut spread = src_scatter.symmetric_eigenvalues().as_slice().to_vec();
    spread.sort_by(|a, b| b.total_cmp(a));
    if spread[0] <= 0.0 || spread[1] <= 1e-12 * spread[0] {
        return Err(SolverError::DegenerateConfiguration);
    }

    let svd = SVD::new(cov, true, true);
    let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut s = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        // Flip the direction of the smallest singular value.
        let (imin, _) = svd
            .singular_values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        s[(imin, imin)] = -1.0;
    }
    let rotation = u * s * v_t;
    let trace_ds: f64 = (0..3).map(|i| svd.singular_values[i] * s[(i, i)]).sum();
    let scale = trace_ds / var_x;
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(SolverError::DegenerateConfiguration);
    }
    let translation = mu_y - scale * (rotation * mu_x);
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}
