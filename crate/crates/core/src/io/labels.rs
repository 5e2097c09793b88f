use std::fs;
use std::path::Path;

use super::IoError;
use crate::metrics::Box3D;

/// Parses a JSON array of boxes. Detections carry `score`, ground truth does not.
pub fn parse_labels(text: &str, path: &Path) -> Result<Vec<Box3D>, IoError> {
    let violation = |field: String, message: String| IoError::SchemaViolation {
        path: path.to_path_buf(),
        field,
        message,
    };
    let de = &mut serde_json::Deserializer::from_str(text);
    let boxes: Vec<Box3D> =
        serde_path_to_error::deserialize(de).map_err(|e| violation(e.path().to_string(), e.inner().to_string()))?;
    for (i, b) in boxes.iter().enumerate() {
        for (k, d) in b.dims.iter().enumerate() {
            if !(*d > 0.0) {
                return Err(violation(format!("[{i}].dims[{k}]"), format!("{d} is not positive")));
            }
        }
        if let Some(s) = b.score {
            if !(s >= 0.0) {
                return Err(violation(format!("[{i}].score"), format!("{s} is negative")));
            }
        }
    }
    Ok(boxes)
}

pub fn read_labels(path: &Path) -> Result<Vec<Box3D>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    parse_labels(&text, path)
}

pub fn write_labels(boxes: &[Box3D], path: &Path) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(boxes).expect("boxes serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}
