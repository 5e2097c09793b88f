//! Ring-wise density manipulation: random sampling (RS) and deterministic
//! grid-based resampling (DGR), and the pipeline that applies them per ring.

mod dgr;
mod grid;
mod interpolate;
mod random;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dgr::{desired_grids, dgr_resample, DgrOptions, Resolution};
pub use grid::{AngularGrid, RowClassifier, SensorSpec};
pub use interpolate::{dgr_interpolate, InterpolationOptions};
pub use random::{keep_count, random_sample, MIN_KEEP};

use crate::exec::{self, Execution};
use crate::geometry::{partition_by_range, GeometryError, PointCloud, RangeSpec};

/// DGR parameter value meaning "leave this ring at native resolution".
pub const DGR_NATIVE_SENTINEL: f64 = 1.0;
/// Coarsest DGR resolution accepted (degrees).
pub const DGR_MAX_RESOLUTION: f64 = 2.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ResampleError {
    #[error("parameter vector has {got} entries, expected {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("parameter {value} for ring {ring} is outside its valid range")]
    ParamOutOfRange { ring: usize, value: f64 },
    #[error(
        "desired resolution ({desired_elevation}, {desired_azimuth}) deg is finer than the native \
         ({native_elevation}, {native_azimuth}) deg"
    )]
    ResolutionBelowNative {
        desired_elevation: f64,
        desired_azimuth: f64,
        native_elevation: f64,
        native_azimuth: f64,
    },
    #[error(
        "interpolation needs a finer resolution than native ({native_elevation}, {native_azimuth}) \
         deg, got ({desired_elevation}, {desired_azimuth})"
    )]
    ResolutionAboveNative {
        desired_elevation: f64,
        desired_azimuth: f64,
        native_elevation: f64,
        native_azimuth: f64,
    },
    #[error("invalid sensor: {0}")]
    InvalidSensor(String),
    #[error("invalid resampling options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResampleMethod {
    Rs,
    Dgr,
    Passthrough,
}

/// Per-ring hyperparameters θ.
///
/// RS: keep fractions in `[0.05, 1]`. DGR: isotropic resolution in degrees
/// in `[native, 2.0]`, where exactly `1.0` leaves the ring untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleParams {
    pub method: ResampleMethod,
    pub values: Vec<f64>,
    #[serde(default)]
    pub seed: u64,
}

impl ResampleParams {
    pub fn rs(values: Vec<f64>, seed: u64) -> Self {
        Self {
            method: ResampleMethod::Rs,
            values,
            seed,
        }
    }

    pub fn dgr(values: Vec<f64>) -> Self {
        Self {
            method: ResampleMethod::Dgr,
            values,
            seed: 0,
        }
    }

    pub fn passthrough(rings: usize) -> Self {
        Self {
            method: ResampleMethod::Passthrough,
            values: vec![1.0; rings],
            seed: 0,
        }
    }

    /// Validity box `(lower, upper)` for one value of this method.
    pub fn bounds(method: ResampleMethod, sensor: &SensorSpec) -> (f64, f64) {
        match method {
            ResampleMethod::Rs => (MIN_KEEP, 1.0),
            ResampleMethod::Dgr => (
                sensor.elevation_resolution.max(sensor.azimuth_resolution),
                DGR_MAX_RESOLUTION,
            ),
            ResampleMethod::Passthrough => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    pub fn validate(&self, rings: usize, sensor: &SensorSpec) -> Result<(), ResampleError> {
        if self.values.len() != rings {
            return Err(ResampleError::LengthMismatch {
                expected: rings,
                got: self.values.len(),
            });
        }
        let (lo, hi) = Self::bounds(self.method, sensor);
        for (ring, &v) in self.values.iter().enumerate() {
            let sentinel = self.method == ResampleMethod::Dgr && is_native(v);
            if !v.is_finite() || (!sentinel && !(lo - 1e-9..=hi + 1e-9).contains(&v)) {
                return Err(ResampleError::ParamOutOfRange { ring, value: v });
            }
        }
        Ok(())
    }

    /// Whether ring `i` is left untouched.
    pub fn is_identity(&self, ring: usize) -> bool {
        match self.method {
            ResampleMethod::Passthrough => true,
            ResampleMethod::Rs => self.values[ring] >= 1.0 - 1e-9,
            ResampleMethod::Dgr => is_native(self.values[ring]),
        }
    }
}

fn is_native(v: f64) -> bool {
    (v - DGR_NATIVE_SENTINEL).abs() < 1e-9
}

/// Point counts of one ring before and after resampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingCounts {
    pub ring: usize,
    pub lower: f64,
    pub upper: f64,
    pub input: usize,
    pub output: usize,
}

/// Sidecar describing how a resampled cloud was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResampleReport {
    pub frame_id: String,
    pub rings: Vec<RingCounts>,
    pub beyond: usize,
    pub seconds: f64,
}

/// Partitions a cloud into rings, resamples each ring and merges the result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResamplePipeline {
    pub ranges: RangeSpec,
    pub sensor: SensorSpec,
    pub dgr: DgrOptions,
    #[serde(skip)]
    pub execution: Execution,
}

impl ResamplePipeline {
    pub fn new(ranges: RangeSpec, sensor: SensorSpec) -> Self {
        Self {
            ranges,
            sensor,
            dgr: DgrOptions::default(),
            execution: Execution::default(),
        }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self, params: &ResampleParams) -> Result<(), ResampleError> {
        self.sensor.validate()?;
        self.dgr.validate()?;
        params.validate(self.ranges.ring_count(), &self.sensor)
    }

    /// Output keeps the input's relative order: every emitted point sits at
    /// the position of the input point it was derived from, so untouched
    /// rings and `beyond` come out exactly as they went in.
    pub fn run(
        &self,
        cloud: &PointCloud,
        params: &ResampleParams,
    ) -> Result<(PointCloud, ResampleReport), ResampleError> {
        let started = Instant::now();
        self.validate(params)?;
        let partition = partition_by_range(cloud, &self.ranges, self.execution)?;

        let per_ring: Vec<Result<Vec<(usize, crate::geometry::Point)>, ResampleError>> =
            exec::map_range(self.execution, partition.ring_count(), |r| {
                let indices = &partition.clusters[r];
                if params.is_identity(r) {
                    return Ok(indices.iter().map(|&i| (i, cloud.points[i])).collect());
                }
                match params.method {
                    ResampleMethod::Rs => Ok(random::sample_ring(indices, params.values[r], params.seed, r)
                        .into_iter()
                        .map(|i| (i, cloud.points[i]))
                        .collect()),
                    ResampleMethod::Dgr => {
                        let ring_points: Vec<_> = indices.iter().map(|&i| cloud.points[i]).collect();
                        let out = dgr::dgr_resample_anchored(
                            &ring_points,
                            &self.sensor,
                            Resolution::isotropic(params.values[r]),
                            &self.dgr,
                            self.execution,
                        )?;
                        Ok(out.into_iter().map(|a| (indices[a.anchor], a.point)).collect())
                    }
                    ResampleMethod::Passthrough => unreachable!("passthrough rings are identity"),
                }
            });

        let mut merged = Vec::with_capacity(cloud.len());
        let mut rings = Vec::with_capacity(partition.ring_count());
        for (r, result) in per_ring.into_iter().enumerate() {
            let out = result?;
            let (lower, upper) = self.ranges.ring_bounds(r);
            rings.push(RingCounts {
                ring: r,
                lower,
                upper,
                input: partition.clusters[r].len(),
                output: out.len(),
            });
            merged.extend(out);
        }
        merged.extend(partition.beyond.iter().map(|&i| (i, cloud.points[i])));
        merged.sort_unstable_by_key(|(anchor, _)| *anchor);

        let out = PointCloud::new(cloud.frame_id.clone(), merged.into_iter().map(|(_, p)| p).collect());
        let report = ResampleReport {
            frame_id: cloud.frame_id.clone(),
            rings,
            beyond: partition.beyond.len(),
            seconds: started.elapsed().as_secs_f64(),
        };
        Ok((out, report))
    }
}
