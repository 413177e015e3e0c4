//! Run configuration: a JSON file with one section per pipeline stage.
//! Every field has a default; unknown keys are rejected. Command-line flags
//! override file values, which override the built-in defaults.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub scenario: ScenarioSection,
    pub objective: ObjectiveSection,
    pub offline: OfflineSection,
    pub online: OnlineSection,
    pub experiment: ExperimentSection,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("cannot read config {}", path.display()))?;
                serde_json::from_str(&text)
                    .with_context(|| format!("invalid config {}", path.display()))
            }
        }
    }
}

/// Scenario and simulator parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub family: String,
    pub n: usize,
    pub horizon_s: f64,
    pub step_s: f64,
    pub max_speed_mps: f64,
    pub waypoint_pause_s: f64,
    pub shadowing_sigma_db: f64,
    pub shadowing_rho: f64,
    pub initial_j: f64,
    pub idle_w: f64,
    pub tx_j_per_bit: f64,
    pub disturbance_times_s: Vec<f64>,
    pub disturbance_fraction: f64,
    pub disturbance_duration_steps: usize,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            family: "I2".into(),
            n: 10,
            horizon_s: 30.0,
            step_s: 1.0,
            max_speed_mps: 5.0,
            waypoint_pause_s: 1.0,
            shadowing_sigma_db: 4.0,
            shadowing_rho: 0.9,
            initial_j: 500.0,
            idle_w: 2.0,
            tx_j_per_bit: 0.05,
            disturbance_times_s: vec![12.0, 19.0, 25.0],
            disturbance_fraction: 0.3,
            disturbance_duration_steps: 2,
        }
    }
}

/// Offline objective weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveSection {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for ObjectiveSection {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.01,
        }
    }
}

/// Candidate-generation parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OfflineSection {
    pub rounds: usize,
    pub samples_per_round: usize,
    /// Diversity penalty weight; null picks half the mean absolute
    /// diagonal of the base matrix.
    pub lambda: Option<f64>,
    pub portfolio: usize,
    pub dedupe: bool,
    /// One of "sa", "brute", "remote".
    pub solver: String,
    pub endpoint: Option<String>,
    pub sweeps: usize,
    pub t_initial: Option<f64>,
    pub t_final: Option<f64>,
    pub restarts: usize,
}

impl Default for OfflineSection {
    fn default() -> Self {
        Self {
            rounds: 5,
            samples_per_round: 10,
            lambda: None,
            portfolio: 10,
            dedupe: true,
            solver: "sa".into(),
            endpoint: None,
            sweeps: 2000,
            t_initial: None,
            t_final: None,
            restarts: 1,
        }
    }
}

/// Online selection parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OnlineSection {
    pub w_perf: f64,
    pub w_life: f64,
    pub hysteresis: f64,
    pub min_dwell_s: f64,
    pub switch_outage_steps: usize,
}

impl Default for OnlineSection {
    fn default() -> Self {
        Self {
            w_perf: 1.0,
            w_life: 0.01,
            hysteresis: 0.05,
            min_dwell_s: 3.0,
            switch_outage_steps: 1,
        }
    }
}

/// Batch experiment parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub num_runs: usize,
    pub output_dir: String,
    pub betas: Vec<f64>,
    pub sweep_seeds: usize,
    pub confidence: f64,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            num_runs: 20,
            output_dir: "out".into(),
            betas: vec![0.0, 1e-3, 1e-2, 1e-1],
            sweep_seeds: 20,
            confidence: 0.95,
        }
    }
}
