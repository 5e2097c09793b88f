//! Deterministic grid-based resampling (resolution reduction).
//!
//! Points are clustered into source elevation rows, each point's norm is
//! replaced by the mean norm of itself and of the points in the neighbouring
//! rows whose norm is within `t_norm`, and the point is snapped onto the
//! coarser desired grid. A desired cell keeps only the first point that lands
//! in it, traversing rows bottom to top and azimuth ascending within a row.

use serde::{Deserialize, Serialize};

use super::grid::{AngularGrid, SensorSpec};
use super::ResampleError;
use crate::exec::{self, Execution};
use crate::geometry::{from_spherical, to_spherical, Point, SphericalCoord};

/// Tolerance used when comparing a requested resolution with the native one.
pub(crate) const RESOLUTION_EPS: f64 = 1e-9;

/// Fixed-point scale for norm sums (2^32 steps per meter). Integer sums are
/// exact, so the mean does not depend on how the neighbours were enumerated.
const NORM_SCALE: f64 = 4_294_967_296.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DgrOptions {
    /// Vertical neighbourhood window `w` (even): rows `n - w/2 ..= n + w/2`
    /// other than `n` are searched for neighbours.
    pub window: usize,
    /// Norm association threshold in meters.
    pub t_norm: f64,
    /// Whether the anchor's own norm enters the mean.
    pub include_anchor: bool,
}

impl Default for DgrOptions {
    fn default() -> Self {
        Self {
            window: 2,
            t_norm: 0.25,
            include_anchor: true,
        }
    }
}

impl DgrOptions {
    pub fn validate(&self) -> Result<(), ResampleError> {
        if self.window % 2 != 0 {
            return Err(ResampleError::InvalidOptions(format!(
                "window must be even, got {}",
                self.window
            )));
        }
        if !(self.t_norm > 0.0 && self.t_norm.is_finite()) {
            return Err(ResampleError::InvalidOptions(format!(
                "t_norm must be positive, got {}",
                self.t_norm
            )));
        }
        Ok(())
    }
}

/// Desired angular resolutions in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    pub elevation: f64,
    pub azimuth: f64,
}

impl Resolution {
    pub fn isotropic(deg: f64) -> Self {
        Self {
            elevation: deg,
            azimuth: deg,
        }
    }
}

/// Output grids `G_dv` and `G_dh` for a sensor and desired resolution.
pub fn desired_grids(sensor: &SensorSpec, desired: Resolution) -> (AngularGrid, AngularGrid) {
    (
        AngularGrid::vertical(sensor.fov_bottom, sensor.fov_span(), desired.elevation),
        AngularGrid::horizontal(desired.azimuth),
    )
}

pub(crate) fn quantize_norm(norm: f64) -> i128 {
    (norm * NORM_SCALE).round() as i128
}

/// Mean of the fixed-point norms, clamped into the contributing range.
pub(crate) fn fixed_point_mean(sum: i128, count: usize, min: f64, max: f64) -> f64 {
    let mean = (sum as f64) / (count as f64) / NORM_SCALE;
    mean.clamp(min, max)
}

/// Norms of one row sorted ascending, with fixed-point prefix sums.
struct RowNorms {
    sorted: Vec<f64>,
    prefix: Vec<i128>,
}

impl RowNorms {
    fn new(mut norms: Vec<f64>) -> Self {
        norms.sort_by(f64::total_cmp);
        let mut prefix = Vec::with_capacity(norms.len() + 1);
        prefix.push(0i128);
        let mut acc = 0i128;
        for n in &norms {
            acc += quantize_norm(*n);
            prefix.push(acc);
        }
        Self { sorted: norms, prefix }
    }

    /// Index range of norms `b` with `|a - b| < t`.
    fn matching(&self, a: f64, t: f64) -> (usize, usize) {
        let lo = self.sorted.partition_point(|&b| b < a && !((a - b).abs() < t));
        let hi = self.sorted.partition_point(|&b| b < a || (a - b).abs() < t);
        (lo, hi.max(lo))
    }
}

/// One emitted point together with the index of the input point it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Anchored {
    pub anchor: usize,
    pub point: Point,
}

pub(crate) fn validate_reduction(sensor: &SensorSpec, desired: Resolution) -> Result<(), ResampleError> {
    sensor.validate()?;
    let ok = |d: f64, native: f64| d.is_finite() && d >= native - RESOLUTION_EPS;
    if !ok(desired.elevation, sensor.elevation_resolution) || !ok(desired.azimuth, sensor.azimuth_resolution) {
        return Err(ResampleError::ResolutionBelowNative {
            desired_elevation: desired.elevation,
            desired_azimuth: desired.azimuth,
            native_elevation: sensor.elevation_resolution,
            native_azimuth: sensor.azimuth_resolution,
        });
    }
    Ok(())
}

/// Resamples the points of one ring onto a coarser angular grid.
pub fn dgr_resample(
    points: &[Point],
    sensor: &SensorSpec,
    desired: Resolution,
    options: &DgrOptions,
    exec: Execution,
) -> Result<Vec<Point>, ResampleError> {
    Ok(dgr_resample_anchored(points, sensor, desired, options, exec)?
        .into_iter()
        .map(|a| a.point)
        .collect())
}

pub(crate) fn dgr_resample_anchored(
    points: &[Point],
    sensor: &SensorSpec,
    desired: Resolution,
    options: &DgrOptions,
    exec: Execution,
) -> Result<Vec<Anchored>, ResampleError> {
    validate_reduction(sensor, desired)?;
    options.validate()?;
    if points.is_empty() {
        return Ok(Vec::new());
    }

    let spherical: Vec<SphericalCoord> = exec::map_slice(exec, points, to_spherical);
    let classifier = sensor.row_classifier();
    let row_count = classifier.row_count();

    // split into elevation clusters
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); row_count];
    for (i, s) in spherical.iter().enumerate() {
        rows[classifier.row_of(s.elevation)].push(i);
    }
    for row in rows.iter_mut() {
        row.sort_by(|&a, &b| spherical[a].azimuth.total_cmp(&spherical[b].azimuth).then(a.cmp(&b)));
    }

    // first writer per desired cell wins
    let (grid_v, grid_h) = desired_grids(sensor, desired);
    let mut occupied = vec![false; grid_v.count * grid_h.count];
    let mut winners: Vec<(usize, usize, usize, usize)> = Vec::new(); // (row, point, cell_v, cell_h)
    for (n, row) in rows.iter().enumerate() {
        for &i in row {
            let cv = grid_v.nearest(spherical[i].elevation);
            let ch = grid_h.nearest(spherical[i].azimuth);
            let cell = cv * grid_h.count + ch;
            if !occupied[cell] {
                occupied[cell] = true;
                winners.push((n, i, cv, ch));
            }
        }
    }

    let row_norms: Vec<RowNorms> = exec::map_slice(exec, &rows, |row| {
        RowNorms::new(row.iter().map(|&i| spherical[i].norm).collect())
    });
    let half = options.window / 2;
    let t = options.t_norm;

    Ok(exec::map_slice(exec, &winners, |&(n, i, cv, ch)| {
        let a = spherical[i].norm;
        let (mut sum, mut count, mut min, mut max) = if options.include_anchor {
            (quantize_norm(a), 1usize, a, a)
        } else {
            (0, 0, f64::INFINITY, f64::NEG_INFINITY)
        };
        let lo_row = n.saturating_sub(half);
        let hi_row = (n + half).min(row_count - 1);
        #[allow(clippy::needless_range_loop)]
        for m in lo_row..=hi_row {
            if m == n {
                continue;
            }
            let rn = &row_norms[m];
            let (lo, hi) = rn.matching(a, t);
            if hi > lo {
                sum += rn.prefix[hi] - rn.prefix[lo];
                count += hi - lo;
                min = min.min(rn.sorted[lo]);
                max = max.max(rn.sorted[hi - 1]);
            }
        }
        let norm_mu = if count == 0 {
            a
        } else {
            fixed_point_mean(sum, count, min, max)
        };
        let mut out = from_spherical(&SphericalCoord {
            norm: norm_mu,
            elevation: grid_v.angle(cv),
            azimuth: grid_h.angle(ch),
        });
        out.intensity = points[i].intensity;
        Anchored { anchor: i, point: out }
    }))
}
