//! Detection metrics (3D IoU, per-range AP) and object density statistics.

mod ap;
mod boxes;
mod density;
mod iou;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use ap::{
    average_precision, default_iou_threshold, greedy_match, per_range_ap, ApReport, ClassAp, ClassThreshold,
    EvalConfig, FrameBoxes,
};
pub use boxes::{normalize_yaw, Box3D, CONTAINMENT_TOL};
pub use density::{density_stats, points_in_box, DensityEntry, DensityStats};
pub use iou::{bev_intersection_area, clip_convex, iou_3d, polygon_area};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("frame {frame}: class {class:?} is not part of the evaluation config")]
    UnknownClass { class: String, frame: String },
    #[error("frame {frame}: detection {index} has negative or non-finite score {score}")]
    NegativeScore { frame: String, index: usize, score: f64 },
    #[error("frame {frame}: detection {index} has no score")]
    MissingScore { frame: String, index: usize },
    #[error("frame {frame}: box {index} has non-finite values or non-positive dims")]
    InvalidBox { frame: String, index: usize },
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
}

/// Overall AP plus one AP per distance ring, all in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApVector {
    pub overall: f64,
    pub ranges: Vec<f64>,
}

impl ApVector {
    pub fn zeros(rings: usize) -> Self {
        Self {
            overall: 0.0,
            ranges: vec![0.0; rings],
        }
    }

    pub fn is_valid(&self) -> bool {
        std::iter::once(&self.overall)
            .chain(&self.ranges)
            .all(|v| (0.0..=1.0).contains(v))
    }
}
