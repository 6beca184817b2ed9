//! Synthetic ring scenes with exact matches, match corruption and benchmark metrics.

mod metrics;

pub use metrics::{emit_table, evaluate, EvalError, EvaluationReport, QueryEvaluation, ThresholdSet};

use std::path::Path;

use nalgebra::Vector3;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::dataio::{write_descriptors, write_matches, write_scene, DataError, ImageSizes};
use crate::geometry::{project, CameraPose, Intrinsics, Point2, Point3};
use crate::pipeline::{GlobalDescriptor, Match, MatchSet};
use crate::scene::{ReferenceImage, SceneDatabase};

/// Number of radial-basis anchors used for synthetic global descriptors.
pub const DESCRIPTOR_ANCHORS: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Reference cameras.
    pub num_cameras: usize,
    pub num_queries: usize,
    pub num_points: usize,
    /// Side of the point cube, which is also the ring radius.
    pub scene_extent: f64,
    pub noise_px: f64,
    pub outlier_frac: f64,
    pub seed: u64,
    pub intrinsics: Intrinsics,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_cameras: 20,
            num_queries: 10,
            num_points: 200,
            scene_extent: 5.0,
            noise_px: 0.0,
            outlier_frac: 0.0,
            seed: 0,
            intrinsics: Intrinsics::new(500.0, 500.0, 320.0, 240.0, 640, 480),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("invalid synthetic configuration: {0}")]
    InvalidConfig(&'static str),
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(0.0..1.0).contains(&self.outlier_frac) {
            return Err(SynthError::InvalidConfig("outlier_frac must lie in [0, 1)"));
        }
        if !(self.noise_px >= 0.0 && self.noise_px.is_finite()) {
            return Err(SynthError::InvalidConfig("noise_px must be non-negative"));
        }
        if !(self.scene_extent > 0.0 && self.scene_extent.is_finite()) {
            return Err(SynthError::InvalidConfig("scene_extent must be positive"));
        }
        if !self.intrinsics.is_valid() {
            return Err(SynthError::InvalidConfig("invalid intrinsics"));
        }
        Ok(())
    }
}

/// A generated fixture. `queries` holds the ground-truth query poses.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub references: SceneDatabase,
    pub queries: SceneDatabase,
    /// One set per (query, reference) pair, query on side `a`.
    pub matches: Vec<MatchSet>,
    /// References first, then queries.
    pub descriptors: Vec<GlobalDescriptor>,
    pub points: Vec<Point3>,
}

/// Random stream for one entity so that generation is order independent.
fn stream(seed: u64, kind: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((kind << 48) | index as u64);
    rng
}

fn ring_camera(rng: &mut ChaCha8Rng, angle: f64, extent: f64) -> CameraPose {
    let height = rng.random_range(-0.1..0.1) * extent;
    let centre = Point3::new(extent * angle.cos(), height, extent * angle.sin());
    let target = Point3::new(
        rng.random_range(-0.05..0.05) * extent,
        rng.random_range(-0.05..0.05) * extent,
        rng.random_range(-0.05..0.05) * extent,
    );
    CameraPose::look_at(&centre, &target, &Vector3::y())
}

/// Radial-basis features of a camera centre against anchors on the ring, L2-normalized.
pub fn ring_descriptor(centre: &Point3, extent: f64) -> Vec<f32> {
    let sigma = extent * std::f64::consts::TAU / DESCRIPTOR_ANCHORS as f64;
    let v: Vec<f64> = (0..DESCRIPTOR_ANCHORS)
        .map(|i| {
            let a = i as f64 * std::f64::consts::TAU / DESCRIPTOR_ANCHORS as f64;
            let anchor = Point3::new(extent * a.cos(), 0.0, extent * a.sin());
            (-(centre - anchor).norm_squared() / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| (x / n) as f32).collect()
}

/// Builds references on a jittered ring, queries at random ring positions,
/// a point cloud in the central cube, exact matches and descriptors.
///
/// Matches are then corrupted with `noise_px` and `outlier_frac`.
pub fn generate_scene(cfg: &SynthConfig) -> Result<SynthScene, SynthError> {
    cfg.validate()?;
    let e = cfg.scene_extent;
    let k = cfg.intrinsics;
    let mut prng = stream(cfg.seed, 0, 0);
    let points: Vec<Point3> = (0..cfg.num_points)
        .map(|_| {
            Point3::new(
                prng.random_range(-0.5..0.5) * e,
                prng.random_range(-0.5..0.5) * e,
                prng.random_range(-0.5..0.5) * e,
            )
        })
        .collect();
    let step = std::f64::consts::TAU / cfg.num_cameras.max(1) as f64;
    let refs: Vec<ReferenceImage> = (0..cfg.num_cameras)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, 1, i);
            let angle = i as f64 * step + rng.random_range(-0.25..0.25) * step;
            ReferenceImage::new(format!("r{i:03}"), k, ring_camera(&mut rng, angle, e))
        })
        .collect();
    let queries: Vec<ReferenceImage> = (0..cfg.num_queries)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(cfg.seed, 2, i);
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            ReferenceImage::new(format!("q{i:03}"), k, ring_camera(&mut rng, angle, e))
        })
        .collect();
    let matches: Vec<MatchSet> = queries
        .par_iter()
        .flat_map_iter(|q| {
            refs.iter().map(|r| {
                let m = points
                    .iter()
                    .filter_map(|x| {
                        let a = project(&q.pose, &k, x).filter(|p| k.contains(p))?;
                        let b = project(&r.pose, &k, x).filter(|p| k.contains(p))?;
                        Some(Match {
                            a,
                            b,
                            confidence: 1.0,
                        })
                    })
                    .collect();
                MatchSet::new(q.id.clone(), r.id.clone(), m)
            })
        })
        .collect();
    let descriptors = refs
        .iter()
        .chain(&queries)
        .map(|im| GlobalDescriptor::new(im.id.clone(), ring_descriptor(&im.pose.center(), e)))
        .collect();
    let references = SceneDatabase::from_images(refs).expect("generated ids are unique");
    let queries = SceneDatabase::from_images(queries).expect("generated ids are unique");
    let sizes = crate::dataio::image_sizes([&references, &queries]);
    let matches = corrupt_matches(&matches, cfg.noise_px, cfg.outlier_frac, cfg.seed, &sizes);
    Ok(SynthScene {
        references,
        queries,
        matches,
        descriptors,
        points,
    })
}

/// Adds Gaussian noise to both endpoints and replaces `⌊outlier_frac · n⌋`
/// matches per set with uniform random in-bounds endpoints.
///
/// Noisy endpoints are clamped to their image. Each set draws from its own
/// random stream, so results do not depend on set order or thread count.
pub fn corrupt_matches(
    sets: &[MatchSet],
    noise_px: f64,
    outlier_frac: f64,
    seed: u64,
    sizes: &ImageSizes,
) -> Vec<MatchSet> {
    let normal = (noise_px > 0.0).then(|| Normal::new(0.0, noise_px).expect("finite sigma"));
    sets.par_iter()
        .enumerate()
        .map(|(s, set)| {
            let mut rng = stream(seed, 3, s);
            let (wa, ha) = sizes.get(&set.id_a).copied().unwrap_or((0, 0));
            let (wb, hb) = sizes.get(&set.id_b).copied().unwrap_or((0, 0));
            let clamp =
                |p: Point2, w: u32, h: u32| Point2::new(p.x.clamp(0.0, w as f64), p.y.clamp(0.0, h as f64));
            let mut matches = set.matches.clone();
            if let Some(normal) = &normal {
                for m in &mut matches {
                    let mut d = || normal.sample(&mut rng);
                    m.a = clamp(Point2::new(m.a.x + d(), m.a.y + d()), wa, ha);
                    m.b = clamp(Point2::new(m.b.x + d(), m.b.y + d()), wb, hb);
                }
            }
            let n_out = (outlier_frac * matches.len() as f64).floor() as usize;
            if n_out > 0 {
                for i in sample(&mut rng, matches.len(), n_out) {
                    matches[i].a = Point2::new(
                        rng.random_range(0.0..=wa as f64),
                        rng.random_range(0.0..=ha as f64),
                    );
                    matches[i].b = Point2::new(
                        rng.random_range(0.0..=wb as f64),
                        rng.random_range(0.0..=hb as f64),
                    );
                }
            }
            MatchSet::new(set.id_a.clone(), set.id_b.clone(), matches)
        })
        .collect()
}

impl SynthScene {
    /// Writes `scene.txt`, `queries.txt`, `matches.txt` and `descriptors.gdsc` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), DataError> {
        std::fs::create_dir_all(dir).map_err(|e| crate::dataio::DataError::Io {
            path: dir.to_owned(),
            source: e,
        })?;
        write_scene(&self.references, &dir.join("scene.txt"))?;
        write_scene(&self.queries, &dir.join("queries.txt"))?;
        write_matches(&self.matches, &dir.join("matches.txt"))?;
        write_descriptors(&self.descriptors, &dir.join("descriptors.gdsc"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::position_error;
    use crate::pipeline::{localize_e5p1, retrieve_topk};
    use crate::robust::RansacConfig;

    fn small() -> SynthConfig {
        SynthConfig {
            num_cameras: 12,
            num_queries: 4,
            num_points: 150,
            ..Default::default()
        }
    }

    #[test]
    fn matches_are_exact_projections() {
        let s = generate_scene(&small()).unwrap();
        let k = small().intrinsics;
        for set in &s.matches {
            let q = s.queries.get(&set.id_a).unwrap();
            let r = s.references.get(&set.id_b).unwrap();
            for m in &set.matches {
                let hit = s.points.iter().any(|x| {
                    project(&q.pose, &k, x).is_some_and(|p| (p - m.a).norm() < 1e-9)
                        && project(&r.pose, &k, x).is_some_and(|p| (p - m.b).norm() < 1e-9)
                });
                assert!(hit);
            }
        }
    }

    #[test]
    fn zero_noise_e5p1_is_exact() {
        let s = generate_scene(&small()).unwrap();
        for q in s.queries.images() {
            let sets: Vec<MatchSet> = s.matches.iter().filter(|m| m.id_a == q.id).cloned().collect();
            let res = localize_e5p1(&q.intrinsics, &s.references, &sets, &RansacConfig::default()).unwrap();
            assert!(position_error(&res.pose.unwrap(), &q.pose) < 1e-6);
        }
    }

    #[test]
    fn no_points_no_matches() {
        let s = generate_scene(&SynthConfig {
            num_points: 0,
            ..small()
        })
        .unwrap();
        assert!(s.matches.iter().all(|m| m.is_empty()));
        let q = &s.queries.images()[0];
        let sets: Vec<MatchSet> = s.matches.iter().filter(|m| m.id_a == q.id).cloned().collect();
        assert!(localize_e5p1(&q.intrinsics, &s.references, &sets, &RansacConfig::default()).is_err());
    }

    #[test]
    fn deterministic_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            noise_px: 1.0,
            outlier_frac: 0.2,
            seed: 42,
            ..small()
        };
        for sub in ["a", "b"] {
            generate_scene(&cfg)
                .unwrap()
                .write(&dir.path().join(sub))
                .unwrap();
        }
        for f in ["scene.txt", "queries.txt", "matches.txt", "descriptors.gdsc"] {
            assert_eq!(
                std::fs::read(dir.path().join("a").join(f)).unwrap(),
                std::fs::read(dir.path().join("b").join(f)).unwrap()
            );
        }
    }

    #[test]
    fn retrieval_prefers_nearby_references() {
        let s = generate_scene(&small()).unwrap();
        let (db, qs) = s.descriptors.split_at(12);
        for q in qs {
            let top = retrieve_topk(q, db, 1);
            let qc = s.queries.get(&q.id).unwrap().pose.center();
            let nearest = s
                .references
                .images()
                .iter()
                .min_by(|a, b| {
                    (a.pose.center() - qc)
                        .norm()
                        .total_cmp(&(b.pose.center() - qc).norm())
                })
                .unwrap();
            assert_eq!(top[0], nearest.id);
        }
    }

    fn sizes() -> ImageSizes {
        ImageSizes::from([("q".to_string(), (640, 480)), ("r".to_string(), (640, 480))])
    }

    fn interior_set(n: usize) -> MatchSet {
        MatchSet::new(
            "q",
            "r",
            (0..n)
                .map(|i| {
                    Match::new(
                        100.0 + (i % 400) as f64,
                        100.0 + (i % 250) as f64,
                        300.0,
                        200.0,
                        1.0,
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn corruption_counts_and_identity() {
        let set = interior_set(1000);
        assert_eq!(
            corrupt_matches(std::slice::from_ref(&set), 0.0, 0.0, 3, &sizes()),
            vec![set.clone()]
        );
        let out = corrupt_matches(std::slice::from_ref(&set), 0.0, 0.3, 3, &sizes());
        let changed = out[0]
            .matches
            .iter()
            .zip(&set.matches)
            .filter(|(a, b)| a != b)
            .count();
        assert_eq!(changed, 300);
        assert_eq!(out, corrupt_matches(&[set], 0.0, 0.3, 3, &sizes()));
    }

    #[test]
    fn noise_standard_deviation() {
        let set = interior_set(25_000);
        let out = corrupt_matches(std::slice::from_ref(&set), 1.0, 0.0, 9, &sizes());
        let d: Vec<f64> = out[0]
            .matches
            .iter()
            .zip(&set.matches)
            .flat_map(|(o, s)| [o.a.x - s.a.x, o.a.y - s.a.y, o.b.x - s.b.x, o.b.y - s.b.y])
            .collect();
        assert_eq!(d.len(), 100_000);
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let std = (d.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / d.len() as f64).sqrt();
        assert!((0.9..=1.1).contains(&std), "{std}");
    }

    #[test]
    fn invalid_configs() {
        assert!(generate_scene(&SynthConfig {
            outlier_frac: 1.0,
            ..small()
        })
        .is_err());
        assert!(generate_scene(&SynthConfig {
            noise_px: -1.0,
            ..small()
        })
        .is_err());
    }
}
