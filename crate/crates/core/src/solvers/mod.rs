//! Minimal solvers used inside the robust estimators.

mod essential;
mod p3p;
mod scale;
mod similarity;

pub use essential::{
    decompose_essential, essential_5pt, pair_depths, BearingPair, EssentialMatrix, DET_TOL, EPIPOLAR_TOL,
    TRACE_TOL,
};
pub use p3p::p3p;
#[allow(unused_imports)]
pub(crate) use p3p::rigid_from_three;
pub use scale::{query_pose_from_relative, solve_scale_e5p1, SCALE_SENSITIVITY_EPS};
pub use similarity::{align_similarity, SimilarityTransform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum SolverError {
    #[error("no valid solution for this sample")]
    EmptySolutionSet,
    #[error("no decomposition places a majority of points in front of both cameras")]
    AmbiguousCheirality,
    #[error("translation scale is not observable from the given rays")]
    ScaleIndeterminate,
    #[error("degenerate point configuration")]
    DegenerateConfiguration,
}
