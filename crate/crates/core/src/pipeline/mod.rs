//! End-to-end structureless localization.

mod localize;
mod retrieval;
mod segments;
mod tracks;

use crate::geometry::Point2;
use crate::robust::RobustError;

pub use localize::{
    localize_e5p1, localize_lt, lt_correspondences, reference_matches, refine_with_segments, SegmentSupport,
    MIN_TRIANGULATION_ANGLE_DEG,
};
pub use retrieval::{retrieve_topk, select_top_matches, GlobalDescriptor};
pub use segments::{
    assign_keypoints_to_segments, match_segments, segment_centroid_matches, segment_iou, SegmentPair,
    SegmentStats, DEFAULT_DILATION_PX, DEFAULT_MIN_AREA_PX, MIN_SEGMENT_IOU,
};
pub use tracks::{build_tracks, Track, DEFAULT_QUANTIZATION_PX};

/// Matches kept per image pair for pose estimation.
pub const POSE_MATCHES: usize = 1024;
/// Matches kept per image pair for segment correspondence.
pub const SEGMENT_MATCHES: usize = 4096;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error("need matches to at least two reference images, found {0}")]
    InsufficientReferences(usize),
    #[error("unknown image '{0}'")]
    UnknownImage(String),
    #[error(transparent)]
    Robust(#[from] RobustError),
}

/// One correspondence between image `a` and image `b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub a: Point2,
    pub b: Point2,
    pub confidence: f64,
}

impl Match {
    pub fn new(xa: f64, ya: f64, xb: f64, yb: f64, confidence: f64) -> Self {
        Self {
            a: Point2::new(xa, ya),
            b: Point2::new(xb, yb),
            confidence,
        }
    }
}

/// Matches between an image pair. Side `a` is the query in localization.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchSet {
    pub id_a: String,
    pub id_b: String,
    pub matches: Vec<Match>,
}

impl MatchSet {
    pub fn new(id_a: impl Into<String>, id_b: impl Into<String>, matches: Vec<Match>) -> Self {
        Self {
            id_a: id_a.into(),
            id_b: id_b.into(),
            matches,
        }
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }
}
