//! Structureless visual localization against posed reference images, with
//! privacy-preserving image obfuscation operators, minimal pose solvers,
//! LO-RANSAC estimators, file formats and a synthetic benchmark harness.

pub mod dataio;
pub mod geometry;
pub mod obfuscate;
pub mod pipeline;
pub mod poly;
pub mod raster;
pub mod robust;
pub mod scene;
pub mod solvers;
pub mod synth;
