//! One-coordinate lattice proposals.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::metrics::ApVector;

/// Slack when checking a proposed value against the validity box.
const BOX_EPS: f64 = 1e-9;

/// A candidate θ' derived from θ by moving one coordinate one lattice step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub values: Vec<f64>,
    /// 0-based coordinate that was perturbed.
    pub ring: usize,
    /// Signed change applied to `values[ring]`; zero when degenerate.
    pub delta: f64,
    /// Both step directions left the validity box; `values` equals θ.
    pub degenerate: bool,
}

/// Draws ring offsets from `|round(N(0, sigma^2))|` and steps of ±`step`.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposer {
    pub step: f64,
    pub sigma: f64,
    pub lower: f64,
    pub upper: f64,
    /// Lattice origin per coordinate (the chain's initial θ).
    pub anchor: Vec<f64>,
    normal: Normal<f64>,
}

impl Proposer {
    pub fn new(step: f64, sigma: f64, lower: f64, upper: f64, anchor: Vec<f64>) -> Self {
        assert!(step > 0.0 && sigma > 0.0 && lower <= upper);
        Self {
            step,
            sigma,
            lower,
            upper,
            anchor,
            normal: Normal::new(0.0, sigma).expect("positive sigma"),
        }
    }

    /// Ring offset for a Gaussian draw `j`, clamped to the last ring.
    pub fn ring_for(&self, j: f64) -> usize {
        let last = self.anchor.len().saturating_sub(1);
        (j.round().abs().min(last as f64)) as usize
    }

    /// Snaps `value` onto the lattice of coordinate `ring`.
    pub fn snap(&self, ring: usize, value: f64) -> f64 {
        let a = self.anchor[ring];
        a + ((value - a) / self.step).round() * self.step
    }

    fn in_box(&self, v: f64) -> bool {
        v >= self.lower - BOX_EPS && v <= self.upper + BOX_EPS
    }

    /// Applies the perturbation rule with a given Gaussian draw `j`. `coin`
    /// yields `true` for a positive step; it is called a second time only if
    /// the first direction leaves the box.
    pub fn perturb(&self, theta: &[f64], j: f64, mut coin: impl FnMut() -> bool) -> Proposal {
        let ring = self.ring_for(j);
        for _ in 0..2 {
            let delta = if coin() { self.step } else { -self.step };
            let v = self.snap(ring, theta[ring] + delta);
            if self.in_box(v) {
                let mut values = theta.to_vec();
                values[ring] = v;
                return Proposal {
                    values,
                    ring,
                    delta,
                    degenerate: false,
                };
            }
        }
        Proposal {
            values: theta.to_vec(),
            ring,
            delta: 0.0,
            degenerate: true,
        }
    }

    pub fn propose<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> Proposal {
        let j = self.normal.sample(rng);
        self.perturb(theta, j, || rng.random_bool(0.5))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AcceptanceRule {
    /// Accept improvements; otherwise accept with probability `new / current`.
    #[default]
    Metropolis,
    /// Accept only if the overall AP does not decrease.
    Greedy,
}

/// Accept/reject on the overall AP.
pub fn accept<R: Rng + ?Sized>(p_new: &ApVector, p_current: &ApVector, rule: AcceptanceRule, rng: &mut R) -> bool {
    if p_new.overall >= p_current.overall || p_current.overall == 0.0 {
        return true;
    }
    match rule {
        AcceptanceRule::Greedy => false,
        AcceptanceRule::Metropolis => {
            let u: f64 = rng.random();
            u < p_new.overall / p_current.overall
        }
    }
}
