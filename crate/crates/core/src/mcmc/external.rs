//! Objective backed by an external evaluator process.
//!
//! Per iteration `t` the optimizer writes `<workspace>/iter_<t>/theta.json`
//! and the resampled `train/` and `val/` datasets, runs
//! `<command...> <workspace>/iter_<t>`, and reads
//! `<workspace>/iter_<t>/ap.json` (`{"overall": f, "ranges": [..]}`). The
//! evaluator is responsible for re-initialising its detector every call.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::objective::{EvalFailure, Objective};
use crate::exec;
use crate::io::{read_cloud, write_cloud, DatasetLayout};
use crate::metrics::ApVector;
use crate::resampling::{ResampleParams, ResamplePipeline};

const POLL_INTERVAL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExternalSpec {
    /// Program and leading arguments; the iteration directory is appended.
    pub command: Vec<String>,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: f64,
    /// Keep the resampled frames after the evaluator returns.
    #[serde(default)]
    pub keep_frames: bool,
}

fn default_timeout() -> f64 {
    3600.0
}

impl ExternalSpec {
    pub fn new(command: Vec<String>) -> Self {
        Self {
            command,
            timeout_seconds: default_timeout(),
            keep_frames: false,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.command.is_empty() || self.command[0].is_empty() {
            return Err("objective.command must name a program".into());
        }
        if !(self.timeout_seconds > 0.0 && self.timeout_seconds.is_finite()) {
            return Err("objective.timeout_seconds must be positive".into());
        }
        Ok(())
    }
}

#[derive(Serialize)]
struct ThetaFile<'a> {
    method: crate::resampling::ResampleMethod,
    values: &'a [f64],
    seed: u64,
}

pub struct ExternalObjective {
    pub spec: ExternalSpec,
    pub workspace: PathBuf,
    pub pipeline: ResamplePipeline,
    pub dataset: DatasetLayout,
    pub train: Vec<String>,
    pub val: Vec<String>,
}

impl ExternalObjective {
    pub fn iteration_dir(&self, t: usize) -> PathBuf {
        self.workspace.join(format!("iter_{t}"))
    }

    /// Resamples `ids` into `<dir>/points`, copying labels alongside.
    fn materialize(&self, dir: &Path, ids: &[String], params: &ResampleParams) -> Result<(), EvalFailure> {
        let out = DatasetLayout::create(dir).map_err(|e| EvalFailure::Fatal(e.to_string()))?;
        out.write_manifest(ids).map_err(|e| EvalFailure::Fatal(e.to_string()))?;
        let results = exec::map_slice(self.pipeline.execution, ids, |id| -> Result<(), String> {
            let src = self.dataset.cloud_path(id);
            let cloud = read_cloud(&src).map_err(|e| format!("frame {id}: {e}"))?;
            let (resampled, _) = self
                .pipeline
                .run(&cloud, params)
                .map_err(|e| format!("frame {id} ({}): {e}", src.display()))?;
            write_cloud(&resampled, &out.cloud_path(id)).map_err(|e| format!("frame {id}: {e}"))?;
            if self.dataset.has_labels(id) {
                let dst = out.label_path(id);
                fs::copy(self.dataset.label_path(id), &dst)
                    .map_err(|e| format!("frame {id}: {}: {e}", dst.display()))?;
            }
            Ok(())
        });
        results
            .into_iter()
            .collect::<Result<(), String>>()
            .map_err(EvalFailure::Fatal)
    }

    fn run_command(&self, dir: &Path) -> Result<(), EvalFailure> {
        let log_path = dir.join("evaluator.log");
        let log = File::create(&log_path).map_err(|e| EvalFailure::Fatal(e.to_string()))?;
        let log_err = log.try_clone().map_err(|e| EvalFailure::Fatal(e.to_string()))?;
        let mut child = Command::new(&self.spec.command[0])
            .args(&self.spec.command[1..])
            .arg(dir)
            .stdin(Stdio::null())
            .stdout(log)
            .stderr(log_err)
            .spawn()
            .map_err(|e| EvalFailure::Fatal(format!("cannot start {:?}: {e}", self.spec.command[0])))?;
        let started = Instant::now();
        let limit = Duration::from_secs_f64(self.spec.timeout_seconds);
        loop {
            match child.try_wait() {
                Ok(Some(status)) if status.success() => return Ok(()),
                Ok(Some(status)) => return Err(EvalFailure::NonZeroExit { code: status.code() }),
                Ok(None) if started.elapsed() >= limit => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(EvalFailure::Timeout {
                        seconds: self.spec.timeout_seconds,
                    });
                }
                Ok(None) => std::thread::sleep(POLL_INTERVAL),
                Err(e) => return Err(EvalFailure::Fatal(e.to_string())),
            }
        }
    }

    fn read_ap(&self, dir: &Path, rings: usize) -> Result<ApVector, EvalFailure> {
        let path = dir.join("ap.json");
        let text = fs::read_to_string(&path)
            .map_err(|e| EvalFailure::MalformedApVector(format!("{}: {e}", path.display())))?;
        let ap: ApVector = serde_json::from_str(&text)
            .map_err(|e| EvalFailure::MalformedApVector(format!("{}: {e}", path.display())))?;
        if ap.ranges.len() != rings {
            return Err(EvalFailure::MalformedApVector(format!(
                "{}: expected {rings} range values, got {}",
                path.display(),
                ap.ranges.len()
            )));
        }
        Ok(ap)
    }
}

impl Objective for ExternalObjective {
    fn evaluate(&mut self, t: usize, params: &ResampleParams) -> Result<ApVector, EvalFailure> {
        let dir = self.iteration_dir(t);
        if dir.exists() {
            // left over from an interrupted run of this iteration
            fs::remove_dir_all(&dir).map_err(|e| EvalFailure::Fatal(format!("{}: {e}", dir.display())))?;
        }
        fs::create_dir_all(&dir).map_err(|e| EvalFailure::Fatal(format!("{}: {e}", dir.display())))?;
        let theta = ThetaFile {
            method: params.method,
            values: &params.values,
            seed: params.seed,
        };
        fs::write(
            dir.join("theta.json"),
            serde_json::to_vec_pretty(&theta).expect("theta serializes"),
        )
        .map_err(|e| EvalFailure::Fatal(e.to_string()))?;
        self.materialize(&dir.join("train"), &self.train, params)?;
        self.materialize(&dir.join("val"), &self.val, params)?;

        let result = self
            .run_command(&dir)
            .and_then(|()| self.read_ap(&dir, params.values.len()));
        if !self.spec.keep_frames {
            let _ = fs::remove_dir_all(dir.join("train"));
            let _ = fs::remove_dir_all(dir.join("val"));
        }
        result
    }

    fn descriptor(&self) -> serde_json::Value {
        json!({
            "kind": "external",
            "command": self.spec.command,
            "timeout_seconds": self.spec.timeout_seconds,
            "dataset": self.dataset.root,
            "n_train": self.train.len(),
            "n_val": self.val.len(),
        })
    }
}
