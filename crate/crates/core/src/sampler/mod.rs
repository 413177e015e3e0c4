//! Pluggable samplers: each invocation draws `k` candidate topologies from a
//! QUBO instance. Backends: seeded simulated annealing, an exhaustive
//! brute-force oracle for small instances, and a remote-annealer adapter with
//! a bundled stub server.

mod brute;
mod remote;
mod sa;

pub use brute::{brute_force, k_lowest_states, BruteForceResult, BruteForceSampler};
pub use remote::{remote_submit, stub, RemoteSampler, DEFAULT_REMOTE_TIMEOUT};
pub use sa::{sa_sample, SaSampler};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::Topology;
use crate::qubo::{QuboError, QuboMatrix};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler config: {0}")]
    InvalidConfig(String),
    #[error("instance dimension {dim} exceeds the exhaustive limit of {max}")]
    DimensionTooLarge { dim: usize, max: usize },
    #[error("transport failure (retryable): {0}")]
    Transport(String),
    #[error("remote protocol violation: {0}")]
    Protocol(String),
    #[error("remote solve timed out after {seconds:.1} s")]
    Timeout { seconds: f64 },
    #[error(transparent)]
    Qubo(#[from] QuboError),
}

/// Simulated-annealing schedule parameters. `t_initial`/`t_final` default to
/// the largest absolute matrix entry and 1e-3 of it when unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaParams {
    pub sweeps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_initial: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_final: Option<f64>,
    pub restarts_per_sample: usize,
}

impl Default for SaParams {
    fn default() -> Self {
        Self {
            sweeps: 2000,
            t_initial: None,
            t_final: None,
            restarts_per_sample: 1,
        }
    }
}

/// One sampler invocation: how many topologies to draw and from which seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub num_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub sa: SaParams,
}

impl SamplerConfig {
    pub fn new(num_samples: usize, seed: u64) -> Self {
        Self {
            num_samples,
            seed,
            sa: SaParams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.num_samples < 1 {
            return Err(SamplerError::InvalidConfig(
                "num_samples must be >= 1".into(),
            ));
        }
        if self.sa.sweeps < 1 {
            return Err(SamplerError::InvalidConfig("sweeps must be >= 1".into()));
        }
        if self.sa.restarts_per_sample < 1 {
            return Err(SamplerError::InvalidConfig(
                "restarts_per_sample must be >= 1".into(),
            ));
        }
        if let (Some(ti), Some(tf)) = (self.sa.t_initial, self.sa.t_final) {
            if !(ti > tf && tf > 0.0) {
                return Err(SamplerError::InvalidConfig(format!(
                    "temperature schedule requires t_initial > t_final > 0, got {ti} -> {tf}"
                )));
            }
        }
        Ok(())
    }

    /// Copy with a shifted seed; the offline loop derives per-round seeds
    /// this way.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut cfg = self.clone();
        cfg.seed = seed;
        cfg
    }
}

/// `k` topologies with their energies under the submitted matrix. Energies
/// always equal independent re-evaluation of each topology.
#[derive(Debug, Clone)]
pub struct SampleBatch {
    pub topologies: Vec<Topology>,
    pub energies: Vec<f64>,
    pub wall_time_s: f64,
}

impl SampleBatch {
    /// Index of the lowest-energy sample (ties to the lowest index).
    pub fn best(&self) -> usize {
        let mut best = 0;
        for i in 1..self.energies.len() {
            if self.energies[i] < self.energies[best] {
                best = i;
            }
        }
        best
    }
}

/// The sampler contract consumed by the offline pipeline.
pub trait Sampler {
    fn sample(&self, q: &QuboMatrix, cfg: &SamplerConfig) -> Result<SampleBatch, SamplerError>;

    fn name(&self) -> &'static str;
}
