//! Range-ring density manipulation for LiDAR point clouds.
//!
//! A cloud is split into planar-distance rings; each ring is thinned by
//! random sampling or re-expressed on a coarser angular grid, with per-ring
//! parameters searched by a Metropolis chain against a detection objective.
//! The crate also carries the evaluation side (3D IoU, per-range AP, object
//! density) and a synthetic scanner for tests.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (default); [`Execution`] selects the mode at runtime and both modes give
//! identical results.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod exec;
pub mod geometry;
pub mod io;
pub mod mcmc;
pub mod metrics;
pub mod resampling;
pub mod synth;

pub use exec::Execution;
pub use geometry::{partition_by_range, Point, PointCloud, RangePartition, RangeSpec};
pub use metrics::{ApVector, Box3D};
pub use resampling::{ResampleMethod, ResampleParams, ResamplePipeline, SensorSpec};
