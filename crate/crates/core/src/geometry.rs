//! Points, spherical coordinates and distance-ring partitioning.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{self, Execution};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point {index} has a non-finite coordinate")]
    NonFiniteCoordinate { index: usize },
    #[error("invalid range spec: {0}")]
    InvalidRangeSpec(String),
    #[error("point {index} lies below the first ring edge ({distance} m < {edge} m)")]
    BelowFirstEdge { index: usize, distance: f64, edge: f64 },
}

/// A sensor-centred Cartesian point (meters) with reflectance payload.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub intensity: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64, z: f64, intensity: f64) -> Self {
        Self { x, y, z, intensity }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// 3D Euclidean norm.
    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// Distance from the sensor projected on the XY plane.
    pub fn planar_distance(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }
}

/// Norm (m), elevation and azimuth (degrees).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalCoord {
    pub norm: f64,
    /// Positive above the sensor's horizontal plane.
    pub elevation: f64,
    /// In `[0, 360)`.
    pub azimuth: f64,
}

/// Maps any angle in degrees into `[0, 360)`.
pub fn normalize_azimuth(deg: f64) -> f64 {
    let a = deg.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if a >= 360.0 {
        0.0
    } else {
        a
    }
}

pub fn to_spherical(p: &Point) -> SphericalCoord {
    let norm = p.norm();
    if norm == 0.0 {
        return SphericalCoord {
            norm: 0.0,
            elevation: 0.0,
            azimuth: 0.0,
        };
    }
    let elevation = (p.z / norm).clamp(-1.0, 1.0).asin().to_degrees();
    let azimuth = normalize_azimuth(p.y.atan2(p.x).to_degrees());
    SphericalCoord {
        norm,
        elevation,
        azimuth,
    }
}

/// Inverse of [`to_spherical`]; the returned point has zero intensity.
pub fn from_spherical(s: &SphericalCoord) -> Point {
    let (sin_el, cos_el) = s.elevation.to_radians().sin_cos();
    let (sin_az, cos_az) = s.azimuth.to_radians().sin_cos();
    Point::new(s.norm * cos_el * cos_az, s.norm * cos_el * sin_az, s.norm * sin_el, 0.0)
}

/// An ordered point cloud for one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub frame_id: String,
}

impl PointCloud {
    pub fn new(frame_id: impl Into<String>, points: Vec<Point>) -> Self {
        Self {
            points,
            frame_id: frame_id.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Returns the index of the first point with a NaN/Inf coordinate.
    pub fn validate(&self) -> Result<(), GeometryError> {
        match self.points.iter().position(|p| !p.is_finite()) {
            Some(index) => Err(GeometryError::NonFiniteCoordinate { index }),
            None => Ok(()),
        }
    }
}

/// Ascending ring edges in meters; `N = edges - 1` half-open rings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RangeSpec {
    boundaries: Vec<f64>,
}

impl RangeSpec {
    pub fn new(boundaries: Vec<f64>) -> Result<Self, GeometryError> {
        if boundaries.len() < 2 {
            return Err(GeometryError::InvalidRangeSpec("need at least two edges".into()));
        }
        if boundaries.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(GeometryError::InvalidRangeSpec(
                "edges must be finite and non-negative".into(),
            ));
        }
        if boundaries.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GeometryError::InvalidRangeSpec(
                "edges must be strictly ascending".into(),
            ));
        }
        Ok(Self { boundaries })
    }

    pub fn boundaries(&self) -> &[f64] {
        &self.boundaries
    }

    pub fn ring_count(&self) -> usize {
        self.boundaries.len() - 1
    }

    /// Bounds `[lower, upper)` of ring `i`.
    pub fn ring_bounds(&self, i: usize) -> (f64, f64) {
        (self.boundaries[i], self.boundaries[i + 1])
    }

    /// Which bucket a distance falls into.
    pub fn locate(&self, distance: f64) -> RingSlot {
        // number of edges <= distance
        let k = self.boundaries.partition_point(|e| *e <= distance);
        if k == 0 {
            RingSlot::Below
        } else if k > self.ring_count() {
            RingSlot::Beyond
        } else {
            RingSlot::Ring(k - 1)
        }
    }
}

impl Default for RangeSpec {
    fn default() -> Self {
        Self {
            boundaries: vec![0.0, 10.0, 20.0, 30.0, 40.0, 50.0],
        }
    }
}

impl TryFrom<Vec<f64>> for RangeSpec {
    type Error = GeometryError;
    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<RangeSpec> for Vec<f64> {
    fn from(r: RangeSpec) -> Self {
        r.boundaries
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RingSlot {
    Below,
    Ring(usize),
    Beyond,
}

/// Disjoint index lists into the source cloud, one per ring, plus the
/// points at or past the last edge.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RangePartition {
    pub clusters: Vec<Vec<usize>>,
    pub beyond: Vec<usize>,
}

impl RangePartition {
    pub fn ring_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn total(&self) -> usize {
        self.clusters.iter().map(Vec::len).sum::<usize>() + self.beyond.len()
    }
}

/// Splits `cloud` into planar-distance rings. Index lists are ascending.
pub fn partition_by_range(
    cloud: &PointCloud,
    spec: &RangeSpec,
    exec: Execution,
) -> Result<RangePartition, GeometryError> {
    let slots = exec::map_slice(exec, &cloud.points, |p| {
        if p.is_finite() {
            Some(spec.locate(p.planar_distance()))
        } else {
            None
        }
    });
    let mut partition = RangePartition {
        clusters: vec![Vec::new(); spec.ring_count()],
        beyond: Vec::new(),
    };
    for (index, slot) in slots.into_iter().enumerate() {
        match slot {
            None => return Err(GeometryError::NonFiniteCoordinate { index }),
            Some(RingSlot::Ring(r)) => partition.clusters[r].push(index),
            Some(RingSlot::Beyond) => partition.beyond.push(index),
            Some(RingSlot::Below) => {
                return Err(GeometryError::BelowFirstEdge {
                    index,
                    distance: cloud.points[index].planar_distance(),
                    edge: spec.boundaries()[0],
                })
            }
        }
    }
    Ok(partition)
}
