//! Perspective-three-point absolute pose (Grunert's quartic).

use nalgebra::{Matrix3, Vector3, SVD};

use super::SolverError;
use crate::geometry::{Bearing, CameraPose, Point3};
use crate::poly;

/// Camera poses placing `points` along `rays`. At most four are returned.
pub fn p3p(points: &[Point3; 3], rays: &[Bearing; 3]) -> Result<Vec<CameraPose>, SolverError> {
    let [p1, p2, p3] = points;
    let a = (p2 - p3).norm();
    let b = (p1 - p3).norm();
    let c = (p1 - p2).norm();
    let area = (p2 - p1).cross(&(p3 - p1)).norm();
    let scale = a.max(b).max(c);
    if scale == 0.0 || area <= 1e-10 * scale * scale {
        return Err(SolverError::EmptySolutionSet);
    }
    let [f1, f2, f3] = rays.map(|r| r.into_inner());
    let cos_alpha = f2.dot(&f3);
    let cos_beta = f1.dot(&f3);
    let cos_gamma = f1.dot(&f2);
    if [cos_alpha, cos_beta, cos_gamma].iter().any(|c| *c > 1.0 - 1e-14) {
        return Err(SolverError::EmptySolutionSet);
    }

    // With s2 = u s1, s3 = v s1 the law of cosines gives
    //   b^2 (1 + u^2 - 2u cos_gamma) = c^2 q(v),  q(v) = 1 + v^2 - 2v cos_beta
    //   b^2 (u^2 + v^2 - 2uv cos_alpha) = a^2 q(v).
    // Subtracting yields u = N(v) / D(v); substituting back gives a quartic.
    let (a2, b2, c2) = (a * a / (b * b), 1.0, c * c / (b * b));
    let q = [1.0, -2.0 * cos_beta, 1.0];
    let n = poly::add(&[1.0, 0.0, -1.0], &poly::scale(&q, a2 - c2));
    let d = [2.0 * cos_gamma, -2.0 * cos_alpha];
    let quartic = poly::add(
        &poly::sub(
            &poly::scale(&poly::mul(&n, &n), b2),
            &poly::scale(&poly::mul(&n, &d), 2.0 * b2 * cos_gamma),
        ),
        &poly::mul(&poly::sub(&[b2], &poly::scale(&q, c2)), &poly::mul(&d, &d)),
    );

    let sq = [a * a, b * b, c * c];
    let cos = [cos_alpha, cos_beta, cos_gamma];
    let mut out: Vec<CameraPose> = Vec::new();
    for v in poly::real_roots(&quartic, 1e-7, 2) {
        let qv = poly::eval(&q, v);
        if qv <= 0.0 || v <= 0.0 {
            continue;
        }
        // u = N/D is 0/0 on symmetric configurations, so take u from the
        // first equation's quadratic and keep roots consistent with the second.
        let disc = cos_gamma * cos_gamma - 1.0 + c2 * qv;
        let mut us = Vec::with_capacity(3);
        let dv = poly::eval(&d, v);
        if dv.abs() > 1e-9 {
            us.push(poly::eval(&n, v) / dv);
        }
        if disc >= 0.0 {
            us.push(cos_gamma + disc.sqrt());
            us.push(cos_gamma - disc.sqrt());
        } else if disc > -1e-9 {
            us.push(cos_gamma);
        }
        for u in us {
            if u <= 0.0 {
                continue;
            }
            let e2 = u * u + v * v - 2.0 * u * v * cos_alpha - a2 * qv;
            if e2.abs() > 1e-5 * (1.0 + u * u + v * v) {
                continue;
            }
            let s1 = b / qv.sqrt();
            let depths = refine_depths(Vector3::new(s1, u * s1, v * s1), sq, cos);
            if depths.iter().any(|s| *s <= 0.0 || !s.is_finite()) {
                continue;
            }
            if law_of_cosines_residual(&depths, sq, cos) > 1e-9 * scale * scale {
                continue;
            }
            let cam = [f1 * depths[0], f2 * depths[1], f3 * depths[2]];
            let Some(pose) = rigid_from_three(points, &cam) else {
                continue;
            };
            let duplicate = out.iter().any(|o| {
                (o.rotation - pose.rotation).norm() < 1e-9
                    && (o.translation - pose.translation).norm() < 1e-9 * (1.0 + scale)
            });
            if !duplicate {
                out.push(pose);
            }
        }
    }
    if out.is_empty() {
        return Err(SolverError::EmptySolutionSet);
    }
    Ok(out)
}

fn residuals(s: &Vector3<f64>, sq: [f64; 3], cos: [f64; 3]) -> Vector3<f64> {
    let [a2, b2, c2] = sq;
    let [ca, cb, cg] = cos;
    Vector3::new(
        s[1] * s[1] + s[2] * s[2] - 2.0 * s[1] * s[2] * ca - a2,
        s[0] * s[0] + s[2] * s[2] - 2.0 * s[0] * s[2] * cb - b2,
        s[0] * s[0] + s[1] * s[1] - 2.0 * s[0] * s[1] * cg - c2,
    )
}

fn law_of_cosines_residual(s: &Vector3<f64>, sq: [f64; 3], cos: [f64; 3]) -> f64 {
    residuals(s, sq, cos).amax()
}

// Gauss-Newton on the three law-of-cosines residuals.
fn refine_depths(mut s: Vector3<f64>, sq: [f64; 3], cos: [f64; 3]) -> Vector3<f64> {
    let [ca, cb, cg] = cos;
    let residual = |s: &Vector3<f64>| residuals(s, sq, cos);
    let mut r = residual(&s);
    for _ in 0..5 {
        let j = Matrix3::new(
            0.0,
            2.0 * s[1] - 2.0 * s[2] * ca,
            2.0 * s[2] - 2.0 * s[1] * ca,
            2.0 * s[0] - 2.0 * s[2] * cb,
            0.0,
            2.0 * s[2] - 2.0 * s[0] * cb,
            2.0 * s[0] - 2.0 * s[1] * cg,
            2.0 * s[1] - 2.0 * s[0] * cg,
            0.0,
        );
        let Some(step) = j.lu().solve(&r) else {
            break;
        };
        let next = s - step;
        let rn = residual(&next);
        if rn.norm() >= r.norm() {
            break;
        }
        s = next;
        r = rn;
    }
    s
}

/// Rigid transform mapping world points onto camera-frame points (Kabsch).
pub(crate) fn rigid_from_three(world: &[Point3; 3], cam: &[Vector3<f64>; 3]) -> Option<CameraPose> {
    let wc = (world[0].coords + world[1].coords + world[2].coords) / 3.0;
    let cc = (cam[0] + cam[1] + cam[2]) / 3.0;
    let mut h = Matrix3::zeros();
    for i in 0..3 {
        h += (cam[i] - cc) * (world[i].coords - wc).transpose();
    }
    let svd = SVD::new(h, true, true);
    let (u, v_t) = (svd.u?, svd.v_t?);
    let mut s = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        s[(2, 2)] = -1.0;
    }
    let r = u * s * v_t;
    let t = cc - r * wc;
    Some(CameraPose::new(r, t))
}
