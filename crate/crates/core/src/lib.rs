//! Open-ended 3D object-part segmentation and category recognition.
//!
//! The pipeline turns a point cloud into one bag-of-words document per
//! downsampled keypoint (a whole-object spin image concatenated with a
//! distance-weighted projection descriptor), learns an independent truncated
//! stick-breaking topic model per semantic part with online variational
//! inference, and labels each keypoint with the part whose model explains its
//! document best. A lightweight argumentation layer maps sets of part labels
//! to object categories and renders the winning rule chain as a
//! human-readable explanation, which keeps recognition usable under heavy
//! occlusion: any surviving distinctive part still fires its rule.
//!
//! Modules follow the pipeline order:
//!
//! - [`pointcloud`]: cloud I/O, voxel downsampling, normals, PCA frames,
//!   random rotation and occlusion simulation
//! - [`descriptors`]: spin images, projection descriptors and documents
//! - [`localhdp`]: per-part topic models, inference and checkpoints
//! - [`abl`]: argumentation rules, category prediction, explanations
//! - [`protocol`]: simulated-teacher evaluation and the occlusion experiment
//! - [`dataset`]: directory-layout dataset loading
//! - [`synthetic`]: generated three-category dataset for tests and demos

pub mod abl;
pub mod dataset;
pub mod descriptors;
mod error;
pub mod localhdp;
pub mod pointcloud;
pub mod protocol;
pub mod synthetic;

pub use error::{Error, Result};
pub use pointcloud::{CloudFormat, Point3, PointCloud, ReferenceFrame};
