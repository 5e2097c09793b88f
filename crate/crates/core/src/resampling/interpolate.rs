//! Local densification onto a finer angular grid.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::dgr::{desired_grids, Resolution, RESOLUTION_EPS};
use super::grid::SensorSpec;
use super::ResampleError;
use crate::geometry::{from_spherical, to_spherical, Point, SphericalCoord};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterpolationOptions {
    /// Maximum norm spread (m) among the neighbours of a filled cell.
    pub t_norm: f64,
    /// Only cells whose elevation is strictly below this angle are filled.
    pub max_elevation: Option<f64>,
}

impl Default for InterpolationOptions {
    fn default() -> Self {
        Self {
            t_norm: 0.25,
            max_elevation: None,
        }
    }
}

const NEIGHBOURS: [(isize, isize); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

/// Returns the original points followed by synthetic points placed in empty
/// cells of the finer grid that have at least two occupied neighbours of
/// consistent norm.
pub fn dgr_interpolate(
    points: &[Point],
    sensor: &SensorSpec,
    desired: Resolution,
    options: &InterpolationOptions,
) -> Result<Vec<Point>, ResampleError> {
    sensor.validate()?;
    let not_coarser = |d: f64, native: f64| d.is_finite() && d > 0.0 && d <= native + RESOLUTION_EPS;
    let finer = |d: f64, native: f64| d < native - RESOLUTION_EPS;
    if !not_coarser(desired.elevation, sensor.elevation_resolution)
        || !not_coarser(desired.azimuth, sensor.azimuth_resolution)
        || !(finer(desired.elevation, sensor.elevation_resolution) || finer(desired.azimuth, sensor.azimuth_resolution))
    {
        return Err(ResampleError::ResolutionAboveNative {
            desired_elevation: desired.elevation,
            desired_azimuth: desired.azimuth,
            native_elevation: sensor.elevation_resolution,
            native_azimuth: sensor.azimuth_resolution,
        });
    }
    if !(options.t_norm > 0.0) {
        return Err(ResampleError::InvalidOptions("t_norm must be positive".into()));
    }

    let (grid_v, grid_h) = desired_grids(sensor, desired);
    let classifier = sensor.row_classifier();
    let spherical: Vec<SphericalCoord> = points.iter().map(to_spherical).collect();

    let mut order: Vec<usize> = (0..points.len()).collect();
    let rows: Vec<usize> = spherical.iter().map(|s| classifier.row_of(s.elevation)).collect();
    order.sort_by(|&a, &b| {
        rows[a]
            .cmp(&rows[b])
            .then(spherical[a].azimuth.total_cmp(&spherical[b].azimuth))
            .then(a.cmp(&b))
    });

    let mut occupied: HashMap<(usize, usize), (f64, f64)> = HashMap::new();
    for &i in &order {
        let cell = (
            grid_v.nearest(spherical[i].elevation),
            grid_h.nearest(spherical[i].azimuth),
        );
        occupied.entry(cell).or_insert((spherical[i].norm, points[i].intensity));
    }

    let neighbour = |(v, h): (usize, usize), (dv, dh): (isize, isize)| -> Option<(usize, usize)> {
        let v = v as isize + dv;
        if v < 0 || v >= grid_v.count as isize {
            return None;
        }
        let h = (h as isize + dh).rem_euclid(grid_h.count as isize);
        Some((v as usize, h as usize))
    };

    let mut candidates = BTreeSet::new();
    for &cell in occupied.keys() {
        for off in NEIGHBOURS {
            if let Some(n) = neighbour(cell, off) {
                if !occupied.contains_key(&n) {
                    candidates.insert(n);
                }
            }
        }
    }

    let mut out = points.to_vec();
    for cell in candidates {
        let elevation = grid_v.angle(cell.0);
        if let Some(limit) = options.max_elevation {
            if elevation >= limit {
                continue;
            }
        }
        let found: Vec<(f64, f64)> = NEIGHBOURS
            .iter()
            .filter_map(|&off| neighbour(cell, off))
            .filter_map(|n| occupied.get(&n).copied())
            .collect();
        if found.len() < 2 {
            continue;
        }
        let (min, max) = found
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (n, _)| {
                (lo.min(*n), hi.max(*n))
            });
        if !(max - min < options.t_norm) {
            continue;
        }
        let k = found.len() as f64;
        let norm = found.iter().map(|f| f.0).sum::<f64>() / k;
        let mut p = from_spherical(&SphericalCoord {
            norm: norm.clamp(min, max),
            elevation,
            azimuth: grid_h.angle(cell.1),
        });
        p.intensity = found.iter().map(|f| f.1).sum::<f64>() / k;
        out.push(p);
    }
    Ok(out)
}
