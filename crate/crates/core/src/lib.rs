//! Two-stage resilient topology control for UAV swarms.
//!
//! Stage 1 (offline) builds a QUBO over candidate links and repeatedly
//! samples it under a frequency-based diversity penalty, producing a
//! portfolio of high-quality, structurally distinct topologies. Stage 2
//! (online) scores that portfolio against live link and energy state and
//! switches topologies under hysteresis and dwell-time guards. A
//! discrete-time simulator and a metrics bench reproduce the evaluation
//! protocol around both stages.

pub mod metrics;
pub mod net;
pub mod offline;
pub mod online;
pub mod qubo;
pub mod sampler;
pub mod sim;
