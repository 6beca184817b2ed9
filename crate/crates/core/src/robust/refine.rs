//! Levenberg-Marquardt pose refinement with a Huber loss.

use nalgebra::{DMatrix, DVector, Matrix6, Rotation3, Vector3, Vector6};

use crate::geometry::{CameraPose, Intrinsics, Point2, Point3};

/// Reprojection residual assigned to points at or behind the camera plane.
pub const BEHIND_CAMERA_RESIDUAL_PX: f64 = 1e6;

const MAX_ITERATIONS: usize = 100;
const RELATIVE_TOLERANCE: f64 = 1e-10;
const INITIAL_DAMPING: f64 = 1e-3;
const MAX_DAMPING: f64 = 1e16;
const MIN_DEPTH: f64 = 1e-12;

/// Applies the update `(ω, δt)`: `R' = exp(ω) R`, `t' = t + δt`.
pub fn perturb(pose: &CameraPose, delta: &Vector6<f64>) -> CameraPose {
    let omega = Vector3::new(delta[0], delta[1], delta[2]);
    let dt = Vector3::new(delta[3], delta[4], delta[5]);
    let r = Rotation3::new(omega).into_inner() * pose.rotation;
    CameraPose::new(r, pose.translation + dt)
}

/// Stacked `(u, v)` reprojection residuals `project(X) - x`.
///
/// A point behind the camera contributes [`BEHIND_CAMERA_RESIDUAL_PX`] in `u`.
pub fn reprojection_residuals(
    pose: &CameraPose,
    correspondences: &[(Point2, Point3)],
    k: &Intrinsics,
) -> DVector<f64> {
    let mut r = DVector::zeros(2 * correspondences.len());
    for (i, (x, world)) in correspondences.iter().enumerate() {
        let p = pose.transform(world);
        if p.z <= MIN_DEPTH {
            r[2 * i] = BEHIND_CAMERA_RESIDUAL_PX;
            continue;
        }
        r[2 * i] = k.fx * p.x / p.z + k.cx - x.x;
        r[2 * i + 1] = k.fy * p.y / p.z + k.cy - x.y;
    }
    r
}

/// Jacobian (`2n × 6`) of [`reprojection_residuals`] with respect to the [`perturb`] parameters at zero.
///
/// Rows of points behind the camera are zero.
pub fn reprojection_jacobian(
    pose: &CameraPose,
    correspondences: &[(Point2, Point3)],
    k: &Intrinsics,
) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * correspondences.len(), 6);
    for (i, (_, world)) in correspondences.iter().enumerate() {
        let rx = pose.rotation * world.coords;
        let p = rx + pose.translation;
        if p.z <= MIN_DEPTH {
            continue;
        }
        let iz = 1.0 / p.z;
        let du = Vector3::new(k.fx * iz, 0.0, -k.fx * p.x * iz * iz);
        let dv = Vector3::new(0.0, k.fy * iz, -k.fy * p.y * iz * iz);
        // dp/dω = -[R X]x, dp/dδt = I
        let dp_dw = -rx.cross_matrix();
        let ju_w = dp_dw.transpose() * du;
        let jv_w = dp_dw.transpose() * dv;
        for c in 0..3 {
            j[(2 * i, c)] = ju_w[c];
            j[(2 * i + 1, c)] = jv_w[c];
            j[(2 * i, 3 + c)] = du[c];
            j[(2 * i + 1, 3 + c)] = dv[c];
        }
    }
    j
}

/// Huber loss on a residual norm `e`: `e²` inside `scale`, linear outside.
pub fn huber(e: f64, scale: f64) -> f64 {
    if e <= scale {
        e * e
    } else {
        2.0 * scale * e - scale * scale
    }
}

/// Sum of Huber losses of the per-correspondence reprojection errors.
pub fn robust_cost(
    pose: &CameraPose,
    correspondences: &[(Point2, Point3)],
    k: &Intrinsics,
    loss_scale_px: f64,
) -> f64 {
    block_cost(
        &reprojection_residuals(pose, correspondences, k),
        2,
        loss_scale_px,
    )
}

/// Minimizes the Huber-robustified reprojection error starting at `initial`.
///
/// The returned pose never has a higher robust cost than `initial`.
pub fn refine_pose(
    initial: &CameraPose,
    correspondences: &[(Point2, Point3)],
    k: &Intrinsics,
    loss_scale_px: f64,
) -> CameraPose {
    if correspondences.is_empty() {
        return *initial;
    }
    levenberg_marquardt(
        initial,
        2,
        |p| reprojection_residuals(p, correspondences, k),
        |p| reprojection_jacobian(p, correspondences, k),
        loss_scale_px,
    )
}

fn block_cost(r: &DVector<f64>, dim: usize, loss_scale: f64) -> f64 {
    r.as_slice()
        .chunks(dim)
        .map(|b| huber(b.iter().map(|v| v * v).sum::<f64>().sqrt(), loss_scale))
        .sum()
}

/// Huber-IRLS Levenberg-Marquardt over [`perturb`] updates.
///
/// Residuals come in blocks of `dim` rows. Each block's weight depends on its norm.
pub(crate) fn levenberg_marquardt(
    initial: &CameraPose,
    dim: usize,
    residuals: impl Fn(&CameraPose) -> DVector<f64>,
    jacobian: impl Fn(&CameraPose) -> DMatrix<f64>,
    loss_scale: f64,
) -> CameraPose {
    let mut pose = *initial;
    let mut r = residuals(&pose);
    let mut cost = block_cost(&r, dim, loss_scale);
    let mut lambda = INITIAL_DAMPING;
    let mut iterations = 0;
    'outer: while iterations < MAX_ITERATIONS && cost > 0.0 {
        let j = jacobian(&pose);
        let mut h = Matrix6::zeros();
        let mut g = Vector6::zeros();
        for (b, block) in r.as_slice().chunks(dim).enumerate() {
            let e = block.iter().map(|v| v * v).sum::<f64>().sqrt();
            let w = if e <= loss_scale { 1.0 } else { loss_scale / e };
            for (d, rv) in block.iter().enumerate() {
                let row = b * dim + d;
                let ji = Vector6::from_fn(|c, _| j[(row, c)]);
                h += w * ji * ji.transpose();
                g += w * ji * *rv;
            }
        }
        if g.amax() == 0.0 {
            break;
        }
        loop {
            iterations += 1;
            let mut damped = h;
            for d in 0..6 {
                damped[(d, d)] += lambda * (h[(d, d)] + 1e-12);
            }
            let accepted = damped.cholesky().and_then(|c| {
                let candidate = perturb(&pose, &c.solve(&(-g)));
                let rc = residuals(&candidate);
                let c = block_cost(&rc, dim, loss_scale);
                (c < cost).then_some((candidate, rc, c))
            });
            match accepted {
                Some((candidate, rc, c)) => {
                    let change = (cost - c) / cost;
                    pose = candidate;
                    r = rc;
                    cost = c;
                    lambda = (lambda * 0.1).max(1e-12);
                    if change < RELATIVE_TOLERANCE {
                        break 'outer;
                    }
                    break;
                }
                None => {
                    lambda *= 10.0;
                    if lambda > MAX_DAMPING || iterations >= MAX_ITERATIONS {
                        break 'outer;
                    }
                }
            }
        }
    }
    pose
}

/// Central-difference Jacobian of `residuals` with respect to [`perturb`] parameters.
pub(crate) fn numeric_jacobian(
    pose: &CameraPose,
    rows: usize,
    residuals: impl Fn(&CameraPose) -> DVector<f64>,
    step: f64,
) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(rows, 6);
    for c in 0..6 {
        let mut d = Vector6::zeros();
        d[c] = step;
        let plus = residuals(&perturb(pose, &d));
        let minus = residuals(&perturb(pose, &(-d)));
        j.set_column(c, &((plus - minus) / (2.0 * step)));
    }
    j
}
