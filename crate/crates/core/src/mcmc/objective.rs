use serde_json::json;
use thiserror::Error;

use crate::metrics::ApVector;
use crate::resampling::ResampleParams;

/// Why an evaluation did not produce a usable AP vector.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalFailure {
    #[error("evaluator timed out after {seconds} s")]
    Timeout { seconds: f64 },
    #[error("evaluator exited with status {code:?}")]
    NonZeroExit { code: Option<i32> },
    #[error("malformed AP vector: {0}")]
    MalformedApVector(String),
    /// The chain cannot continue (e.g. the input dataset is unreadable).
    #[error("fatal objective failure: {0}")]
    Fatal(String),
}

impl EvalFailure {
    pub fn is_fatal(&self) -> bool {
        matches!(self, EvalFailure::Fatal(_))
    }
}

/// Black-box detection-performance objective. Evaluations may be noisy and
/// have side effects.
pub trait Objective {
    fn evaluate(&mut self, iteration: usize, params: &ResampleParams) -> Result<ApVector, EvalFailure>;

    /// Opaque description recorded in the chain checkpoint.
    fn descriptor(&self) -> serde_json::Value;
}

/// `g(θ) = max(0, 1 - Σ (θ_i - θ*_i)^2)`, reported as the overall AP and
/// for every ring.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSurrogate {
    pub target: Vec<f64>,
}

impl QuadraticSurrogate {
    pub fn new(target: Vec<f64>) -> Self {
        Self { target }
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let mut sum = 0.0;
        for (v, t) in theta.iter().zip(&self.target) {
            let d = v - t;
            sum += d * d;
        }
        (1.0 - sum).max(0.0)
    }
}

impl Objective for QuadraticSurrogate {
    fn evaluate(&mut self, _iteration: usize, params: &ResampleParams) -> Result<ApVector, EvalFailure> {
        if params.values.len() != self.target.len() {
            return Err(EvalFailure::Fatal(format!(
                "surrogate expects {} values, got {}",
                self.target.len(),
                params.values.len()
            )));
        }
        let g = self.value(&params.values);
        Ok(ApVector {
            overall: g,
            ranges: vec![g; self.target.len()],
        })
    }

    fn descriptor(&self) -> serde_json::Value {
        json!({ "kind": "surrogate", "target": self.target })
    }
}
