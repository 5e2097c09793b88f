//! Sensor description and the angular grids used by grid-based resampling.

use serde::{Deserialize, Serialize};

use super::ResampleError;

/// Slack applied when turning a ratio of angles into a grid count.
const COUNT_EPS: f64 = 1e-9;

/// Spinning LiDAR angular layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub beam_count: usize,
    /// Native vertical resolution (degrees). For variable-resolution sensors
    /// this is the finest beam spacing.
    pub elevation_resolution: f64,
    /// Native horizontal resolution (degrees).
    pub azimuth_resolution: f64,
    pub fov_bottom: f64,
    pub fov_top: f64,
    /// Explicit ascending per-beam elevations (degrees).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beam_elevations: Option<Vec<f64>>,
}

impl SensorSpec {
    /// 64-beam, uniformly spaced sensor with Waymo-like resolutions.
    pub fn waymo_like() -> Self {
        Self {
            beam_count: 64,
            elevation_resolution: 0.18,
            azimuth_resolution: 0.22,
            fov_bottom: -10.0,
            fov_top: -10.0 + 63.0 * 0.18,
            beam_elevations: None,
        }
    }

    /// 40-beam sensor with a variable (0.3 to 1.7 degree) beam spacing that
    /// is densest just below the horizon.
    pub fn once_like() -> Self {
        let beams = vec![
            -18.45, -16.75, -15.21, -13.81, -12.54, -11.39, -10.35, -9.41, -8.56, -7.8, -7.11, -6.48, -5.91, -5.39,
            -4.92, -4.48, -4.07, -3.69, -3.33, -2.99, -2.66, -2.34, -2.03, -1.72, -1.42, -1.12, -0.82, -0.52, -0.22,
            0.09, 0.41, 0.76, 1.16, 1.63, 2.21, 2.92, 3.81, 4.92, 6.3, 8.0,
        ];
        Self {
            beam_count: 40,
            elevation_resolution: 0.3,
            azimuth_resolution: 0.2,
            fov_bottom: -18.45,
            fov_top: 8.0,
            beam_elevations: Some(beams),
        }
    }

    pub fn validate(&self) -> Result<(), ResampleError> {
        let bad = |m: &str| Err(ResampleError::InvalidSensor(m.to_string()));
        if self.beam_count == 0 {
            return bad("beam_count must be positive");
        }
        if !(self.elevation_resolution > 0.0 && self.azimuth_resolution > 0.0) {
            return bad("resolutions must be positive");
        }
        if self.azimuth_resolution > 360.0 {
            return bad("azimuth resolution exceeds a full turn");
        }
        if !(self.fov_bottom.is_finite() && self.fov_top.is_finite()) || self.fov_bottom >= self.fov_top {
            return bad("fov_bottom must be below fov_top");
        }
        if let Some(beams) = &self.beam_elevations {
            if beams.len() != self.beam_count {
                return bad("beam_elevations length differs from beam_count");
            }
            if beams.windows(2).any(|w| w[0] >= w[1]) {
                return bad("beam_elevations must be strictly ascending");
            }
            let tol = 1e-9;
            if beams
                .iter()
                .any(|b| *b < self.fov_bottom - tol || *b > self.fov_top + tol)
            {
                return bad("beam_elevations must lie within the vertical FOV");
            }
        }
        Ok(())
    }

    pub fn fov_span(&self) -> f64 {
        self.fov_top - self.fov_bottom
    }

    /// Elevation of every beam, bottom to top.
    pub fn beam_angles(&self) -> Vec<f64> {
        match &self.beam_elevations {
            Some(b) => b.clone(),
            None => (0..self.beam_count)
                .map(|k| self.fov_bottom + self.elevation_resolution * k as f64)
                .collect(),
        }
    }

    /// Source elevation grid `G_v`.
    pub fn source_vertical_grid(&self) -> AngularGrid {
        AngularGrid::vertical(self.fov_bottom, self.fov_span(), self.elevation_resolution)
    }

    /// Source azimuth grid `G_h`.
    pub fn source_horizontal_grid(&self) -> AngularGrid {
        AngularGrid::horizontal(self.azimuth_resolution)
    }

    /// Assigns an elevation to a source row: nearest beam from the table
    /// when one is given, nearest `G_v` node otherwise. Out-of-FOV angles
    /// clamp to the end rows.
    pub fn row_classifier(&self) -> RowClassifier {
        match &self.beam_elevations {
            Some(beams) => RowClassifier::Table(beams.clone()),
            None => RowClassifier::Uniform(self.source_vertical_grid()),
        }
    }
}

/// Arithmetic sequence of angles `start + step * n`, `n < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngularGrid {
    pub start: f64,
    pub step: f64,
    pub count: usize,
    /// Azimuth grids wrap around at 360 degrees.
    pub periodic: bool,
}

impl AngularGrid {
    /// `floor(span / step) + 1` nodes starting at `start`.
    pub fn vertical(start: f64, span: f64, step: f64) -> Self {
        let count = (span / step + COUNT_EPS).floor() as usize + 1;
        Self {
            start,
            step,
            count,
            periodic: false,
        }
    }

    /// Nodes covering `[0, 360)`.
    pub fn horizontal(step: f64) -> Self {
        let count = ((360.0 / step) - COUNT_EPS).ceil().max(1.0) as usize;
        Self {
            start: 0.0,
            step,
            count,
            periodic: true,
        }
    }

    pub fn angle(&self, n: usize) -> f64 {
        self.start + self.step * n as f64
    }

    /// Index of the nearest node. Vertical grids clamp to their end nodes;
    /// azimuth grids treat 360 as 0.
    pub fn nearest(&self, angle: f64) -> usize {
        let raw = ((angle - self.start) / self.step).round();
        if !self.periodic {
            return raw.clamp(0.0, (self.count - 1) as f64) as usize;
        }
        let n = raw.max(0.0) as usize;
        if n >= self.count {
            return 0;
        }
        // the gap between the last node and 360 may be narrower than a step
        let to_node = (angle - self.angle(n)).abs();
        let to_wrap = 360.0 - angle;
        if to_wrap < to_node {
            0
        } else {
            n
        }
    }
}

#[derive(Debug, Clone)]
pub enum RowClassifier {
    Uniform(AngularGrid),
    Table(Vec<f64>),
}

impl RowClassifier {
    pub fn row_count(&self) -> usize {
        match self {
            RowClassifier::Uniform(g) => g.count,
            RowClassifier::Table(t) => t.len(),
        }
    }

    pub fn row_of(&self, elevation: f64) -> usize {
        match self {
            RowClassifier::Uniform(g) => g.nearest(elevation),
            RowClassifier::Table(t) => {
                let k = t.partition_point(|b| *b < elevation);
                if k == 0 {
                    0
                } else if k == t.len() {
                    t.len() - 1
                } else if elevation - t[k - 1] <= t[k] - elevation {
                    k - 1
                } else {
                    k
                }
            }
        }
    }
}
