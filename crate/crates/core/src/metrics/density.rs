//! Object-level point density per class and distance bucket.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::boxes::Box3D;
use crate::exec::{self, Execution};
use crate::geometry::{PointCloud, RangeSpec, RingSlot};

/// Number of points of `cloud` inside `b` (boundary inclusive).
pub fn points_in_box(cloud: &PointCloud, b: &Box3D) -> usize {
    cloud.points.iter().filter(|p| b.contains(p)).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEntry {
    pub class: String,
    pub ring: usize,
    pub lower: f64,
    pub upper: f64,
    pub box_count: usize,
    pub mean_points: f64,
}

/// Mean point count inside ground-truth boxes, bucketed by the 3D distance
/// of the box centre. Buckets without boxes are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityStats {
    pub entries: Vec<DensityEntry>,
    /// Boxes whose centre lies at or past the last edge.
    pub boxes_beyond: usize,
}

impl DensityStats {
    pub fn get(&self, class: &str, ring: usize) -> Option<&DensityEntry> {
        self.entries.iter().find(|e| e.class == class && e.ring == ring)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,ring,lower,upper,box_count,mean_points\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.class, e.ring, e.lower, e.upper, e.box_count, e.mean_points
            ));
        }
        out
    }
}

pub fn density_stats(frames: &[(PointCloud, Vec<Box3D>)], ranges: &RangeSpec, exec: Execution) -> DensityStats {
    let counts: Vec<Vec<usize>> = exec::map_slice(exec, frames, |(cloud, boxes)| {
        boxes.iter().map(|b| points_in_box(cloud, b)).collect()
    });

    // (class, ring) -> (boxes, points)
    let mut acc: BTreeMap<(String, usize), (usize, usize)> = BTreeMap::new();
    let mut boxes_beyond = 0;
    for ((_, boxes), counts) in frames.iter().zip(counts) {
        for (b, n) in boxes.iter().zip(counts) {
            match ranges.locate(b.distance()) {
                RingSlot::Ring(r) => {
                    let e = acc.entry((b.class.clone(), r)).or_default();
                    e.0 += 1;
                    e.1 += n;
                }
                _ => boxes_beyond += 1,
            }
        }
    }
    let entries = acc
        .into_iter()
        .map(|((class, ring), (boxes, points))| {
            let (lower, upper) = ranges.ring_bounds(ring);
            DensityEntry {
                class,
                ring,
                lower,
                upper,
                box_count: boxes,
                mean_points: points as f64 / boxes as f64,
            }
        })
        .collect();
    DensityStats { entries, boxes_beyond }
}
