//! Per-ring uniform random thinning.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ResampleError;
use crate::exec::{self, Execution};
use crate::geometry::{PointCloud, RangePartition};

/// Smallest keep fraction accepted.
pub const MIN_KEEP: f64 = 0.05;

/// Number of points retained from a ring of `n` points.
///
/// `floor(keep * n)`; the small slack absorbs round-off in keep fractions
/// built by repeated lattice steps (e.g. `0.9 * 10` must give 9).
pub fn keep_count(keep: f64, n: usize) -> usize {
    ((keep * n as f64) + 1e-9).floor().min(n as f64) as usize
}

/// Derives an independent stream seed for one ring.
pub(crate) fn ring_seed(seed: u64, ring: usize) -> u64 {
    // splitmix64 finalizer over (seed, ring)
    let mut z = seed ^ (ring as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub(crate) fn validate_keep(keep: &[f64], rings: usize) -> Result<(), ResampleError> {
    if keep.len() != rings {
        return Err(ResampleError::LengthMismatch {
            expected: rings,
            got: keep.len(),
        });
    }
    for (ring, &s) in keep.iter().enumerate() {
        if !(MIN_KEEP - 1e-9..=1.0 + 1e-9).contains(&s) {
            return Err(ResampleError::ParamOutOfRange { ring, value: s });
        }
    }
    Ok(())
}

/// Indices (into the source cloud, ascending) kept from one ring.
pub(crate) fn sample_ring(indices: &[usize], keep: f64, seed: u64, ring: usize) -> Vec<usize> {
    let k = keep_count(keep, indices.len());
    if k == indices.len() {
        return indices.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ring_seed(seed, ring));
    let mut picked = rand::seq::index::sample(&mut rng, indices.len(), k).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| indices[i]).collect()
}

/// Keeps `floor(s_i * N_i)` uniformly chosen points of every ring and all
/// points beyond the last ring, in their original relative order.
pub fn random_sample(
    cloud: &PointCloud,
    partition: &RangePartition,
    keep: &[f64],
    seed: u64,
    exec: Execution,
) -> Result<PointCloud, ResampleError> {
    validate_keep(keep, partition.ring_count())?;
    let kept = exec::map_range(exec, partition.ring_count(), |r| {
        sample_ring(&partition.clusters[r], keep[r], seed, r)
    });
    let mut selected: Vec<usize> = kept.into_iter().flatten().collect();
    selected.extend_from_slice(&partition.beyond);
    selected.sort_unstable();
    Ok(PointCloud::new(
        cloud.frame_id.clone(),
        selected.into_iter().map(|i| cloud.points[i]).collect(),
    ))
}
