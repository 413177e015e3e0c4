//! Exhaustive enumeration oracle for small QUBO instances.
//!
//! States are walked in Gray-code order with incremental energy updates, so
//! the full 2^dim sweep costs O(2^dim * dim) instead of O(2^dim * dim^2).
//! Candidate minima are re-evaluated exactly before they are accepted, and
//! ties break toward the state whose bit vector encodes the smaller
//! little-endian integer.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use crate::net::Topology;
use crate::qubo::QuboMatrix;

use super::{SampleBatch, Sampler, SamplerConfig, SamplerError};

/// Hard cap on exhaustive enumeration (2^22 ~ 4.2M states).
pub const MAX_BRUTE_FORCE_DIM: usize = 22;

#[derive(Debug, Clone)]
pub struct BruteForceResult {
    pub argmin: Topology,
    pub min_energy: f64,
    /// Energies of all 2^dim states indexed by the little-endian integer
    /// value of the bit vector, when requested.
    pub spectrum: Option<Vec<f64>>,
}

fn bits_from_value(value: u64, dim: usize) -> Vec<u8> {
    (0..dim).map(|e| ((value >> e) & 1) as u8).collect()
}

fn exact_energy(q: &QuboMatrix, value: u64) -> f64 {
    let topo = Topology::from_bits(bits_from_value(value, q.dim())).expect("bits are 0/1");
    q.objective(&topo).expect("dims match")
}

/// Walks all states in Gray-code order, invoking `visit(value, energy)` for
/// each. `energy` is incrementally tracked; callers needing exact values for
/// decisions should re-evaluate via [`exact_energy`].
fn enumerate(q: &QuboMatrix, mut visit: impl FnMut(u64, f64)) {
    let dim = q.dim();
    let mut bits = vec![0u8; dim];
    // field[e] = q_ee + 2 sum_{j != e} q_ej x_j
    let mut field: Vec<f64> = (0..dim).map(|e| q.entry(e, e)).collect();
    let mut energy = 0.0;
    visit(0, energy);
    for i in 1u64..(1u64 << dim) {
        let e = i.trailing_zeros() as usize;
        let delta = (1.0 - 2.0 * f64::from(bits[e])) * field[e];
        let sign = if bits[e] == 0 { 1.0 } else { -1.0 };
        bits[e] ^= 1;
        energy += delta;
        for j in 0..dim {
            if j != e {
                field[j] += 2.0 * sign * q.entry(j, e);
            }
        }
        visit(i ^ (i >> 1), energy);
    }
}

/// Exact global minimum of `x^T Q x` over all binary vectors.
pub fn brute_force(q: &QuboMatrix, want_spectrum: bool) -> Result<BruteForceResult, SamplerError> {
    let dim = q.dim();
    if dim > MAX_BRUTE_FORCE_DIM {
        return Err(SamplerError::DimensionTooLarge {
            dim,
            max: MAX_BRUTE_FORCE_DIM,
        });
    }
    if dim == 0 {
        return Err(SamplerError::InvalidConfig(
            "cannot enumerate a zero-dimensional instance".into(),
        ));
    }
    let mut spectrum = want_spectrum.then(|| vec![0.0; 1usize << dim]);
    let mut best_value = 0u64;
    let mut best_exact = 0.0f64; // all-zero state has energy exactly 0
    enumerate(q, |value, energy| {
        if let Some(s) = spectrum.as_mut() {
            s[value as usize] = energy;
        }
        // Guard window absorbs incremental round-off before the exact check.
        let guard = 1e-6 * (1.0 + best_exact.abs());
        if energy <= best_exact + guard {
            let exact = exact_energy(q, value);
            if exact < best_exact || (exact == best_exact && value < best_value) {
                best_exact = exact;
                best_value = value;
            }
        }
    });
    Ok(BruteForceResult {
        argmin: Topology::from_bits(bits_from_value(best_value, dim)).expect("bits are 0/1"),
        min_energy: best_exact,
        spectrum,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapItem {
    energy: f64,
    value: u64,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Energies are finite by construction.
        self.energy
            .partial_cmp(&other.energy)
            .expect("finite energies")
            .then(self.value.cmp(&other.value))
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `k` lowest-energy states, ascending by (energy, little-endian value).
pub fn k_lowest_states(
    q: &QuboMatrix,
    k: usize,
) -> Result<Vec<(Topology, f64)>, SamplerError> {
    let dim = q.dim();
    if dim > MAX_BRUTE_FORCE_DIM {
        return Err(SamplerError::DimensionTooLarge {
            dim,
            max: MAX_BRUTE_FORCE_DIM,
        });
    }
    if dim == 0 || k == 0 {
        return Err(SamplerError::InvalidConfig(
            "need dim >= 1 and k >= 1 for exhaustive sampling".into(),
        ));
    }
    let states = 1u64 << dim;
    if k as u64 > states {
        return Err(SamplerError::InvalidConfig(format!(
            "requested {k} distinct states but the instance only has {states}"
        )));
    }
    let mut heap: BinaryHeap<HeapItem> = BinaryHeap::with_capacity(k + 1);
    enumerate(q, |value, energy| {
        let item = HeapItem { energy, value };
        if heap.len() < k {
            heap.push(item);
        } else if item < *heap.peek().expect("heap non-empty") {
            heap.pop();
            heap.push(item);
        }
    });
    let mut items = heap.into_vec();
    items.sort();
    Ok(items
        .into_iter()
        .map(|item| {
            let topo =
                Topology::from_bits(bits_from_value(item.value, dim)).expect("bits are 0/1");
            let energy = q.objective(&topo).expect("dims match");
            (topo, energy)
        })
        .collect())
}

/// Sampler adapter: returns the `k` lowest-energy states. Fully
/// deterministic; the seed is ignored.
#[derive(Debug, Default, Clone, Copy)]
pub struct BruteForceSampler;

impl Sampler for BruteForceSampler {
    fn sample(&self, q: &QuboMatrix, cfg: &SamplerConfig) -> Result<SampleBatch, SamplerError> {
        cfg.validate()?;
        let start = Instant::now();
        let states = k_lowest_states(q, cfg.num_samples)?;
        let (topologies, energies) = states.into_iter().unzip();
        Ok(SampleBatch {
            topologies,
            energies,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }

    fn name(&self) -> &'static str {
        "brute"
    }
}
