//! Synthetic spinning-LiDAR scanner over parametric scenes.
//!
//! One ray per (beam, azimuth node) from the origin; the nearest hit on a
//! box face or the ground plane within `max_range` becomes a point exactly on
//! the sensor's angular grid. Output order is row-major: beams bottom to
//! top, azimuth ascending.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::exec::{self, Execution};
use crate::geometry::{from_spherical, Point, PointCloud, SphericalCoord};
use crate::metrics::Box3D;
use crate::resampling::SensorSpec;

pub const OBJECT_INTENSITY: f64 = 1.0;
pub const GROUND_INTENSITY: f64 = 0.5;

/// Minimum hit distance; the sensor itself is not a surface.
const MIN_HIT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangeNoise {
    /// Standard deviation of the additive range error (m).
    pub sigma: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    #[serde(default = "default_frame_id")]
    pub frame_id: String,
    /// Height of the ground plane (m); `None` for no ground.
    #[serde(default)]
    pub ground_height: Option<f64>,
    #[serde(default)]
    pub objects: Vec<Box3D>,
    pub max_range: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub range_noise: Option<RangeNoise>,
}

fn default_frame_id() -> String {
    "synthetic".to_string()
}

impl Scene {
    pub fn ground_only(ground_height: f64, max_range: f64) -> Self {
        Self {
            frame_id: default_frame_id(),
            ground_height: Some(ground_height),
            objects: Vec::new(),
            max_range,
            range_noise: None,
        }
    }

    pub fn with_objects(mut self, objects: Vec<Box3D>) -> Self {
        self.objects = objects;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.max_range > 0.0 && self.max_range.is_finite()) {
            return Err("max_range must be positive".into());
        }
        if let Some(h) = self.ground_height {
            if !h.is_finite() {
                return Err("ground_height must be finite".into());
            }
        }
        for (i, b) in self.objects.iter().enumerate() {
            if !b.is_valid() {
                return Err(format!("objects[{i}] is degenerate"));
            }
            if b.distance() > self.max_range {
                return Err(format!("objects[{i}] lies beyond max_range"));
            }
        }
        if let Some(n) = self.range_noise {
            if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
                return Err("range_noise.sigma must be non-negative".into());
            }
        }
        Ok(())
    }
}

/// Entry distance of a ray from the origin along unit `dir` into `b`.
fn ray_box(dir: [f64; 3], b: &Box3D) -> Option<f64> {
    let (s, c) = b.yaw.sin_cos();
    // origin and direction in the box frame
    let o = [-b.center[0], -b.center[1], -b.center[2]];
    let o_local = [o[0] * c + o[1] * s, -o[0] * s + o[1] * c, o[2]];
    let d_local = [dir[0] * c + dir[1] * s, -dir[0] * s + dir[1] * c, dir[2]];
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    for axis in 0..3 {
        let half = b.dims[axis] / 2.0;
        if d_local[axis].abs() < 1e-15 {
            if o_local[axis].abs() > half {
                return None;
            }
            continue;
        }
        let t1 = (-half - o_local[axis]) / d_local[axis];
        let t2 = (half - o_local[axis]) / d_local[axis];
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        t_near = t_near.max(lo);
        t_far = t_far.min(hi);
    }
    (t_near <= t_far && t_near > MIN_HIT).then_some(t_near)
}

/// Nearest hit along a unit ray: `(distance, intensity)`. Ties go to objects
/// before the ground, and to the lower object index.
fn cast(dir: [f64; 3], scene: &Scene) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64)> = None;
    for b in &scene.objects {
        if let Some(t) = ray_box(dir, b) {
            if best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, OBJECT_INTENSITY));
            }
        }
    }
    if let Some(h) = scene.ground_height {
        if dir[2] != 0.0 {
            let t = h / dir[2];
            if t > MIN_HIT && best.is_none_or(|(bt, _)| t < bt) {
                best = Some((t, GROUND_INTENSITY));
            }
        }
    }
    best.filter(|(t, _)| *t <= scene.max_range)
}

/// Scans `scene` and returns the cloud with the scene's boxes as ground truth.
pub fn simulate_scan(scene: &Scene, sensor: &SensorSpec, exec: Execution) -> (PointCloud, Vec<Box3D>) {
    debug_assert!(scene.validate().is_ok());
    let beams = sensor.beam_angles();
    let grid_h = sensor.source_horizontal_grid();
    let noise = scene
        .range_noise
        .filter(|n| n.sigma > 0.0)
        .map(|n| (n, Normal::new(0.0, n.sigma).expect("sigma validated")));

    let rows: Vec<Vec<Point>> = exec::map_range(exec, beams.len(), |row| {
        let elevation = beams[row];
        let mut rng = noise
            .as_ref()
            .map(|(n, _)| ChaCha8Rng::seed_from_u64(n.seed ^ (row as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)));
        let mut out = Vec::new();
        for col in 0..grid_h.count {
            let azimuth = grid_h.angle(col);
            let unit = from_spherical(&SphericalCoord {
                norm: 1.0,
                elevation,
                azimuth,
            });
            let Some((mut t, intensity)) = cast([unit.x, unit.y, unit.z], scene) else {
                continue;
            };
            if let (Some(rng), Some((_, dist))) = (rng.as_mut(), noise.as_ref()) {
                t = (t + dist.sample(rng)).max(MIN_HIT);
            }
            let mut p = from_spherical(&SphericalCoord {
                norm: t,
                elevation,
                azimuth,
            });
            p.intensity = intensity;
            out.push(p);
        }
        out
    });

    let cloud = PointCloud::new(scene.frame_id.clone(), rows.into_iter().flatten().collect());
    (cloud, scene.objects.clone())
}
