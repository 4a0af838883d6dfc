//! Structured point cloud video (SPCV) construction.
//!
//! An unordered point cloud sequence is re-organized into a `T x U x V` grid
//! of 3D coordinates: a convolutional generator is overfit to map a flat
//! `(u, v, 0)` grid onto the first frame, then per-pixel deformation fields
//! carry that grid through the remaining frames.

pub mod autodiff;
pub mod error;
pub mod fixtures;
pub mod frame;
pub mod geom;
pub mod index;
pub mod io;
pub mod metrics;
pub mod quality;
pub mod sequence;
pub mod vec3;

pub use error::{Error, Result};
pub use geom::{farthest_point_sample, normalize_unit_box, NormalizationTransform, PointCloud};
pub use index::{build_index, Neighbor, SpatialIndex};
