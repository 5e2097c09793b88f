use std::fs;
use std::path::Path;

use super::IoError;
use crate::geometry::{Point, PointCloud};

/// Four little-endian f32 values: x, y, z, intensity.
pub const BYTES_PER_POINT: usize = 16;

/// Decodes a headerless float32 cloud. `path` is only used in errors.
pub fn decode_cloud(bytes: &[u8], frame_id: &str, path: &Path) -> Result<PointCloud, IoError> {
    if bytes.len() % BYTES_PER_POINT != 0 {
        return Err(IoError::TruncatedFile {
            path: path.to_path_buf(),
            len: bytes.len() as u64,
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / BYTES_PER_POINT);
    for (index, chunk) in bytes.chunks_exact(BYTES_PER_POINT).enumerate() {
        let f = |k: usize| f32::from_le_bytes(chunk[4 * k..4 * k + 4].try_into().expect("4-byte slice")) as f64;
        let p = Point::new(f(0), f(1), f(2), f(3));
        if !p.is_finite() || !p.intensity.is_finite() {
            return Err(IoError::NonFiniteCoordinate {
                path: path.to_path_buf(),
                index,
            });
        }
        points.push(p);
    }
    Ok(PointCloud::new(frame_id, points))
}

pub fn encode_cloud(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * BYTES_PER_POINT);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

/// Reads `<frame_id>.bin`; the frame id is the file stem.
pub fn read_cloud(path: &Path) -> Result<PointCloud, IoError> {
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    let frame_id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    decode_cloud(&bytes, &frame_id, path)
}

pub fn write_cloud(cloud: &PointCloud, path: &Path) -> Result<(), IoError> {
    fs::write(path, encode_cloud(cloud)).map_err(|e| IoError::io(path, e))
}
