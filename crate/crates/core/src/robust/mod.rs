//! LO-RANSAC pose estimation with MSAC scoring and adaptive termination.

mod e5p1;
mod p3p;
mod refine;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::geometry::CameraPose;

pub(crate) use e5p1::polish_e5p1;
pub use e5p1::{e5p1_residuals_sq, ransac_e5p1, ransac_e5p1_traced, ReferenceMatches};
pub use p3p::{p3p_residuals_sq, ransac_p3p, ransac_p3p_traced};
pub use refine::{
    huber, perturb, refine_pose, reprojection_jacobian, reprojection_residuals, robust_cost,
    BEHIND_CAMERA_RESIDUAL_PX,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RobustError {
    #[error("invalid RANSAC configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RansacConfig {
    pub max_iterations: usize,
    pub inlier_threshold_px: f64,
    pub confidence: f64,
    pub lo_iterations: usize,
    pub min_inliers: usize,
    pub seed: u64,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            inlier_threshold_px: 3.0,
            confidence: 0.999,
            lo_iterations: 10,
            min_inliers: 12,
            seed: 0,
        }
    }
}

impl RansacConfig {
    pub fn validate(&self) -> Result<(), RobustError> {
        if self.max_iterations < 1 {
            return Err(RobustError::InvalidConfig("max_iterations must be at least 1"));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(RobustError::InvalidConfig("confidence must lie in (0, 1)"));
        }
        if !(self.inlier_threshold_px > 0.0 && self.inlier_threshold_px.is_finite()) {
            return Err(RobustError::InvalidConfig("inlier threshold must be positive"));
        }
        Ok(())
    }

    /// Same configuration with the seed mixed with a per-query index.
    pub fn for_query(&self, index: u64) -> Self {
        Self {
            seed: self.seed ^ index,
            ..*self
        }
    }
}

/// Outcome of a robust estimation. `pose == None` is a failure.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationResult {
    pub pose: Option<CameraPose>,
    pub num_inliers: usize,
    pub num_correspondences: usize,
    pub iterations_run: usize,
    pub inlier_mask: Vec<bool>,
    /// MSAC score of `pose` over all correspondences, `+∞` on failure.
    pub score: f64,
}

impl LocalizationResult {
    pub fn failure(num_correspondences: usize, iterations_run: usize) -> Self {
        Self {
            pose: None,
            num_inliers: 0,
            num_correspondences,
            iterations_run,
            inlier_mask: vec![false; num_correspondences],
            score: f64::INFINITY,
        }
    }

    pub fn is_success(&self) -> bool {
        self.pose.is_some()
    }
}

/// Truncated quadratic score `Σ min(e², τ²)` and the inlier mask `e² ≤ τ²`.
pub fn msac_score(residuals_sq: &[f64], threshold_px: f64) -> (f64, Vec<bool>) {
    let t2 = threshold_px * threshold_px;
    let mut score = 0.0;
    let mask = residuals_sq
        .iter()
        .map(|&e2| {
            let inlier = e2 <= t2;
            score += if inlier { e2 } else { t2 };
            inlier
        })
        .collect();
    (score, mask)
}

/// Number of samples needed so that an all-inlier sample of size `m` is drawn with probability `confidence`.
pub fn required_iterations(inlier_ratio: f64, sample_size: usize, confidence: f64) -> usize {
    let w_m = inlier_ratio.clamp(0.0, 1.0).powi(sample_size as i32);
    if w_m >= 1.0 {
        return 1;
    }
    if w_m <= 0.0 {
        return usize::MAX;
    }
    let k = (1.0 - confidence).ln() / (1.0 - w_m).ln();
    if k.is_finite() {
        k.ceil().max(1.0) as usize
    } else {
        usize::MAX
    }
}

/// A minimal-sample pose problem driven by [`lo_ransac`].
pub(crate) trait PoseProblem {
    fn num_data(&self) -> usize;
    fn sample_size(&self) -> usize;
    /// Draws a minimal sample. `false` when no valid sample exists.
    fn sample(&self, rng: &mut ChaCha8Rng, out: &mut Vec<usize>) -> bool;
    fn solve(&self, sample: &[usize], out: &mut Vec<CameraPose>);
    fn residuals_sq(&self, pose: &CameraPose, out: &mut Vec<f64>);
    /// Nonlinear re-estimation on an inlier set.
    fn refine(&self, pose: &CameraPose, inliers: &[usize]) -> Option<CameraPose>;
}

struct Best {
    pose: CameraPose,
    score: f64,
    mask: Vec<bool>,
    inliers: usize,
}

fn evaluate<P: PoseProblem>(
    problem: &P,
    pose: &CameraPose,
    tau: f64,
    buf: &mut Vec<f64>,
) -> (f64, Vec<bool>, usize) {
    problem.residuals_sq(pose, buf);
    let (score, mask) = msac_score(buf, tau);
    let inliers = mask.iter().filter(|m| **m).count();
    (score, mask, inliers)
}

pub(crate) fn lo_ransac<P: PoseProblem>(
    problem: &P,
    cfg: &RansacConfig,
    mut trace: Option<&mut Vec<f64>>,
) -> LocalizationResult {
    let n = problem.num_data();
    let tau = cfg.inlier_threshold_px;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<Best> = None;
    let mut sample = Vec::with_capacity(problem.sample_size());
    let mut models = Vec::new();
    let mut buf = Vec::with_capacity(n);
    let mut limit = cfg.max_iterations;
    let mut iterations = 0;

    while iterations < limit {
        sample.clear();
        if !problem.sample(&mut rng, &mut sample) {
            break;
        }
        iterations += 1;
        models.clear();
        problem.solve(&sample, &mut models);
        for model in &models {
            let (score, mask, inliers) = evaluate(problem, model, tau, &mut buf);
            if let Some(t) = trace.as_deref_mut() {
                t.push(score);
            }
            if best.as_ref().is_some_and(|b| score >= b.score) {
                continue;
            }
            let mut current = Best {
                pose: *model,
                score,
                mask,
                inliers,
            };
            for _ in 0..cfg.lo_iterations {
                let idx: Vec<usize> = (0..n).filter(|&i| current.mask[i]).collect();
                let Some(refined) = problem.refine(&current.pose, &idx) else {
                    break;
                };
                let (score, mask, inliers) = evaluate(problem, &refined, tau, &mut buf);
                if let Some(t) = trace.as_deref_mut() {
                    t.push(score);
                }
                if score >= current.score {
                    break;
                }
                current = Best {
                    pose: refined,
                    score,
                    mask,
                    inliers,
                };
            }
            let needed = required_iterations(
                current.inliers as f64 / n as f64,
                problem.sample_size(),
                cfg.confidence,
            );
            limit = cfg.max_iterations.min(needed);
            best = Some(current);
        }
    }

    match best {
        Some(b) if b.inliers >= cfg.min_inliers => LocalizationResult {
            pose: Some(b.pose),
            num_inliers: b.inliers,
            num_correspondences: n,
            iterations_run: iterations,
            inlier_mask: b.mask,
            score: b.score,
        },
        _ => LocalizationResult::failure(n, iterations),
    }
}
