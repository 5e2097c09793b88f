//! On-disk formats: headerless float32 point clouds, JSON labels, dataset
//! layout with manifests, and the run configuration.

mod cloud;
mod config;
mod dataset;
mod labels;

use std::path::PathBuf;

use thiserror::Error;

pub use cloud::{decode_cloud, encode_cloud, read_cloud, write_cloud, BYTES_PER_POINT};
pub use config::{McmcSettings, ObjectiveConfig, RunConfig, SubsetSizes};
pub use dataset::{select_subsets, DatasetLayout};
pub use labels::{parse_labels, read_labels, write_labels};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: length {len} is not a multiple of 16 bytes")]
    TruncatedFile { path: PathBuf, len: u64 },
    #[error("{path}: point {index} has a non-finite coordinate")]
    NonFiniteCoordinate { path: PathBuf, index: usize },
    #[error("{path}: schema violation at `{field}`: {message}")]
    SchemaViolation {
        path: PathBuf,
        field: String,
        message: String,
    },
    #[error("frame {frame_id}: points file {path} does not exist")]
    MissingFrame { frame_id: String, path: PathBuf },
    #[error("{path}: {message}")]
    InvalidManifest { path: PathBuf, message: String },
    #[error("need {requested} frames but the manifest lists {available}")]
    InsufficientFrames { available: usize, requested: usize },
    #[error("{path}: invalid config: {message}")]
    Config { path: PathBuf, message: String },
}

impl IoError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.into(),
            source,
        }
    }
}
