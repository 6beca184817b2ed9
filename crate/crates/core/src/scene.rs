//! Posed reference images.

use std::collections::HashMap;
use std::path::PathBuf;

use nalgebra::Quaternion;

use crate::geometry::{CameraPose, Intrinsics};

/// Tolerance on the rotation invariants of stored poses.
pub const POSE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("duplicate image id '{0}'")]
    DuplicateId(String),
    #[error("image '{0}' has invalid intrinsics")]
    InvalidIntrinsics(String),
    #[error("image '{0}' has an invalid pose")]
    InvalidPose(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceImage {
    pub id: String,
    pub intrinsics: Intrinsics,
    pub pose: CameraPose,
    /// Scalar-first world-to-camera quaternion as read from disk.
    ///
    /// Kept alongside `pose` so that rewriting a file reproduces it exactly.
    pub quaternion: Quaternion<f64>,
    pub raster: Option<PathBuf>,
    pub labelmap: Option<PathBuf>,
}

impl ReferenceImage {
    pub fn new(id: impl Into<String>, intrinsics: Intrinsics, pose: CameraPose) -> Self {
        Self {
            id: id.into(),
            intrinsics,
            quaternion: pose.quaternion().into_inner(),
            pose,
            raster: None,
            labelmap: None,
        }
    }
}

/// Reference images with unique ids, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneDatabase {
    images: Vec<ReferenceImage>,
    index: HashMap<String, usize>,
}

impl SceneDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_images(images: Vec<ReferenceImage>) -> Result<Self, SceneError> {
        let mut db = Self::new();
        for im in images {
            db.push(im)?;
        }
        Ok(db)
    }

    pub fn push(&mut self, image: ReferenceImage) -> Result<(), SceneError> {
        if self.index.contains_key(&image.id) {
            return Err(SceneError::DuplicateId(image.id));
        }
        if !image.intrinsics.is_valid() {
            return Err(SceneError::InvalidIntrinsics(image.id));
        }
        if !image.pose.is_valid(POSE_TOLERANCE) {
            return Err(SceneError::InvalidPose(image.id));
        }
        self.index.insert(image.id.clone(), self.images.len());
        self.images.push(image);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ReferenceImage> {
        self.index.get(id).map(|&i| &self.images[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn images(&self) -> &[ReferenceImage] {
        &self.images
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}
