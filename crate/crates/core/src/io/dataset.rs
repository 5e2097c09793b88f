use std::fs;
use std::path::{Path, PathBuf};

use super::IoError;

/// `<root>/points/<id>.bin`, optional `<root>/labels/<id>.json`, and an
/// ordered frame list in `<root>/manifest.txt` (one id per line).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetLayout {
    pub root: PathBuf,
}

impl DatasetLayout {
    pub const MANIFEST: &'static str = "manifest.txt";

    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    /// Creates the directory skeleton.
    pub fn create(root: impl Into<PathBuf>) -> Result<Self, IoError> {
        let layout = Self::new(root);
        for dir in [layout.points_dir(), layout.labels_dir()] {
            fs::create_dir_all(&dir).map_err(|e| IoError::io(&dir, e))?;
        }
        Ok(layout)
    }

    pub fn points_dir(&self) -> PathBuf {
        self.root.join("points")
    }

    pub fn labels_dir(&self) -> PathBuf {
        self.root.join("labels")
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(Self::MANIFEST)
    }

    pub fn cloud_path(&self, frame_id: &str) -> PathBuf {
        self.points_dir().join(format!("{frame_id}.bin"))
    }

    pub fn label_path(&self, frame_id: &str) -> PathBuf {
        self.labels_dir().join(format!("{frame_id}.json"))
    }

    pub fn has_labels(&self, frame_id: &str) -> bool {
        self.label_path(frame_id).is_file()
    }

    pub fn read_manifest(&self) -> Result<Vec<String>, IoError> {
        read_manifest_file(&self.manifest_path())
    }

    pub fn write_manifest(&self, ids: &[String]) -> Result<(), IoError> {
        write_manifest_file(&self.manifest_path(), ids)
    }

    /// Reads the manifest and checks every entry has a points file.
    pub fn frames(&self) -> Result<Vec<String>, IoError> {
        let ids = self.read_manifest()?;
        for id in &ids {
            let path = self.cloud_path(id);
            if !path.is_file() {
                return Err(IoError::MissingFrame {
                    frame_id: id.clone(),
                    path,
                });
            }
        }
        Ok(ids)
    }
}

pub fn read_manifest_file(path: &Path) -> Result<Vec<String>, IoError> {
    let text = fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let mut ids = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (line_no, line) in text.lines().enumerate() {
        let id = line.trim();
        if id.is_empty() {
            continue;
        }
        if id.contains(['/', '\\']) {
            return Err(IoError::InvalidManifest {
                path: path.to_path_buf(),
                message: format!("line {}: frame id {id:?} contains a path separator", line_no + 1),
            });
        }
        if !seen.insert(id.to_string()) {
            return Err(IoError::InvalidManifest {
                path: path.to_path_buf(),
                message: format!("line {}: duplicate frame id {id:?}", line_no + 1),
            });
        }
        ids.push(id.to_string());
    }
    Ok(ids)
}

pub fn write_manifest_file(path: &Path, ids: &[String]) -> Result<(), IoError> {
    let mut text = String::new();
    for id in ids {
        text.push_str(id);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| IoError::io(path, e))
}

/// Stride selection: train takes every `floor(N / n_train)`-th frame from the
/// start; val takes every `floor(M / n_val)`-th frame of the `M` remaining
/// frames, in manifest order.
pub fn select_subsets(
    manifest: &[String],
    n_train: usize,
    n_val: usize,
) -> Result<(Vec<String>, Vec<String>), IoError> {
    let n = manifest.len();
    if n_train + n_val > n {
        return Err(IoError::InsufficientFrames {
            available: n,
            requested: n_train + n_val,
        });
    }
    let mut taken = vec![false; n];
    let mut train = Vec::with_capacity(n_train);
    if let Some(stride) = n.checked_div(n_train) {
        for k in 0..n_train {
            taken[k * stride] = true;
            train.push(manifest[k * stride].clone());
        }
    }
    let rest: Vec<&String> = manifest
        .iter()
        .zip(&taken)
        .filter(|(_, t)| !**t)
        .map(|(id, _)| id)
        .collect();
    let mut val = Vec::with_capacity(n_val);
    if let Some(stride) = rest.len().checked_div(n_val) {
        for k in 0..n_val {
            val.push(rest[k * stride].clone());
        }
    }
    Ok((train, val))
}
