use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;

/// Slack for boundary-inclusive containment tests (m).
pub const CONTAINMENT_TOL: f64 = 1e-9;

/// Oriented 3D box. `center` is the geometric centre; `dims` are
/// (length along heading, width, height); `yaw` rotates about +z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub class: String,
    pub center: [f64; 3],
    pub dims: [f64; 3],
    pub yaw: f64,
    /// Present on detections, absent on ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Wraps an angle into `(-pi, pi]`.
pub fn normalize_yaw(yaw: f64) -> f64 {
    let y = yaw.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

impl Box3D {
    pub fn new(class: impl Into<String>, center: [f64; 3], dims: [f64; 3], yaw: f64) -> Self {
        Self {
            class: class.into(),
            center,
            dims,
            yaw: normalize_yaw(yaw),
            score: None,
        }
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.score = Some(score);
        self
    }

    pub fn is_valid(&self) -> bool {
        self.center.iter().all(|c| c.is_finite())
            && self.dims.iter().all(|d| d.is_finite() && *d > 0.0)
            && self.yaw.is_finite()
    }

    pub fn volume(&self) -> f64 {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn z_range(&self) -> (f64, f64) {
        let h = self.dims[2] / 2.0;
        (self.center[2] - h, self.center[2] + h)
    }

    pub fn planar_distance(&self) -> f64 {
        self.center[0].hypot(self.center[1])
    }

    pub fn distance(&self) -> f64 {
        (self.center[0] * self.center[0] + self.center[1] * self.center[1] + self.center[2] * self.center[2]).sqrt()
    }

    /// Footprint corners, counter-clockwise.
    pub fn bev_corners(&self) -> [[f64; 2]; 4] {
        let (s, c) = self.yaw.sin_cos();
        let hl = self.dims[0] / 2.0;
        let hw = self.dims[1] / 2.0;
        let local = [[hl, hw], [-hl, hw], [-hl, -hw], [hl, -hw]];
        local.map(|[lx, ly]| [self.center[0] + lx * c - ly * s, self.center[1] + lx * s + ly * c])
    }

    /// The eight corners (bottom face first).
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let (z0, z1) = self.z_range();
        let bev = self.bev_corners();
        let mut out = [[0.0; 3]; 8];
        for (k, [x, y]) in bev.iter().enumerate() {
            out[k] = [*x, *y, z0];
            out[k + 4] = [*x, *y, z1];
        }
        out
    }

    /// Boundary-inclusive containment test in the box frame.
    pub fn contains(&self, p: &Point) -> bool {
        let (s, c) = self.yaw.sin_cos();
        let dx = p.x - self.center[0];
        let dy = p.y - self.center[1];
        let lx = dx * c + dy * s;
        let ly = -dx * s + dy * c;
        let lz = p.z - self.center[2];
        lx.abs() <= self.dims[0] / 2.0 + CONTAINMENT_TOL
            && ly.abs() <= self.dims[1] / 2.0 + CONTAINMENT_TOL
            && lz.abs() <= self.dims[2] / 2.0 + CONTAINMENT_TOL
    }
}
