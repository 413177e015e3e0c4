//! Discrete-time swarm simulator: random-waypoint mobility, AR(1)
//! log-normal shadowing on top of free-space path loss, TDMA throughput
//! mapping, per-node energy drain, scheduled link disturbances, and the
//! performance-retention experiment comparing a fixed topology against
//! online switching.
//!
//! Randomness is split into independent named streams (mobility, shadowing,
//! disturbance) derived from one root seed, so the environment a run
//! observes is a pure function of the scenario: the static and dynamic arms
//! of an experiment see identical mobility and shadowing, and topology
//! choices can never perturb the environment draws.
//!
//! Nodes that drift beyond the snapshot's link range keep their links; the
//! capacity simply decays with distance. Only disturbances, switch outages,
//! and energy depletion take links down hard.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{
    build_link_index, capacity_bps, fspl_db, LinkIndex, NetError, NetworkSnapshot, RadioParams,
    Topology,
};
use crate::offline::{CandidateEntry, CandidateSet};
use crate::online::{
    select_topology, utility_score, LinkStateSample, OnlineError, SwitchPolicy, UtilityWeights,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("candidate set spans {actual} links but the snapshot indexes {expected}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Online(#[from] OnlineError),
}

/// Random-waypoint mobility inside an axis-aligned box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MobilityParams {
    pub max_speed_mps: f64,
    pub waypoint_pause_s: f64,
    pub area_min: [f64; 3],
    pub area_max: [f64; 3],
}

/// Per-node battery model: constant idle draw plus a per-bit transmit cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    pub initial_j: f64,
    pub idle_w: f64,
    pub tx_j_per_bit: f64,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            initial_j: 500.0,
            idle_w: 2.0,
            tx_j_per_bit: 0.05,
        }
    }
}

/// One scheduled disturbance: at `time_s` a random `affected_fraction` of
/// the currently live active links drops for `duration_steps` steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbance {
    pub time_s: f64,
    pub affected_fraction: f64,
    pub duration_steps: usize,
}

/// The disturbance protocol of the retention experiment: three events at
/// 12, 19, and 25 s, each masking 30% of the live links for two steps.
pub fn default_disturbances() -> Vec<Disturbance> {
    [12.0, 19.0, 25.0]
        .into_iter()
        .map(|time_s| Disturbance {
            time_s,
            affected_fraction: 0.3,
            duration_steps: 2,
        })
        .collect()
}

/// Full description of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub snapshot: NetworkSnapshot,
    pub horizon_s: f64,
    pub step_s: f64,
    pub mobility: MobilityParams,
    pub shadowing_sigma_db: f64,
    pub shadowing_rho: f64,
    pub energy: EnergyParams,
    pub disturbances: Vec<Disturbance>,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Scenario with the experiment defaults: 30 s horizon at 1 s steps,
    /// 5 m/s random waypoint inside the inflated snapshot bounding box,
    /// 4 dB / rho 0.9 shadowing, and no disturbances.
    pub fn new(snapshot: NetworkSnapshot, seed: u64) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &snapshot.nodes {
            for axis in 0..3 {
                lo[axis] = lo[axis].min(p[axis]);
                hi[axis] = hi[axis].max(p[axis]);
            }
        }
        let mut area_min = [0.0; 3];
        let mut area_max = [0.0; 3];
        for axis in 0..3 {
            let pad = 0.25 * (hi[axis] - lo[axis]) + 10.0;
            area_min[axis] = lo[axis] - pad;
            area_max[axis] = hi[axis] + pad;
        }
        Self {
            snapshot,
            horizon_s: 30.0,
            step_s: 1.0,
            mobility: MobilityParams {
                max_speed_mps: 5.0,
                waypoint_pause_s: 1.0,
                area_min,
                area_max,
            },
            shadowing_sigma_db: 4.0,
            shadowing_rho: 0.9,
            energy: EnergyParams::default(),
            disturbances: Vec::new(),
            seed,
        }
    }

    pub fn num_steps(&self) -> usize {
        (self.horizon_s / self.step_s).round() as usize
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.snapshot
            .validate()
            .map_err(|e| SimError::InvalidScenario(e.to_string()))?;
        if !(self.horizon_s > 0.0) || !(self.step_s > 0.0) || self.num_steps() < 1 {
            return Err(SimError::InvalidScenario(format!(
                "horizon {} s and step {} s leave no steps to simulate",
                self.horizon_s, self.step_s
            )));
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return Err(SimError::InvalidScenario(
                "shadowing sigma must be non-negative".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.shadowing_rho) {
            return Err(SimError::InvalidScenario(
                "shadowing rho must lie in [0, 1]".into(),
            ));
        }
        if !(self.mobility.max_speed_mps >= 0.0) || !(self.mobility.waypoint_pause_s >= 0.0) {
            return Err(SimError::InvalidScenario(
                "mobility parameters must be non-negative".into(),
            ));
        }
        for axis in 0..3 {
            if self.mobility.area_min[axis] > self.mobility.area_max[axis] {
                return Err(SimError::InvalidScenario("mobility area is inverted".into()));
            }
        }
        for d in &self.disturbances {
            if !(0.0..=1.0).contains(&d.affected_fraction) {
                return Err(SimError::InvalidScenario(format!(
                    "disturbance fraction {} outside [0, 1]",
                    d.affected_fraction
                )));
            }
            if d.time_s < 0.0 {
                return Err(SimError::InvalidScenario("disturbance before t=0".into()));
            }
        }
        if !(self.energy.initial_j >= 0.0)
            || !(self.energy.idle_w >= 0.0)
            || !(self.energy.tx_j_per_bit >= 0.0)
        {
            return Err(SimError::InvalidScenario(
                "energy parameters must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Independent named RNG stream derived from the root seed.
pub fn stream_rng(seed: u64, name: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(splitmix64(seed ^ fnv1a64(name.as_bytes())))
}

/// Linear SNR at distance `d` with an additive shadowing term in dB.
fn shadowed_snr(radio: &RadioParams, distance_m: f64, shadow_db: f64) -> f64 {
    let rx_dbm = radio.tx_power_dbm - fspl_db(distance_m, radio.carrier_freq_hz) + shadow_db;
    10f64.powf((rx_dbm - radio.noise_dbm) / 10.0)
}

/// Advances the temporally correlated shadowing state one step and returns
/// the per-link SINR at the given positions:
/// `s(t) = rho * s(t-1) + sqrt(1 - rho^2) * N(0, sigma^2)`.
pub fn step_channel(
    radio: &RadioParams,
    index: &LinkIndex,
    positions: &[[f64; 3]],
    shadow_db: &mut [f64],
    sigma_db: f64,
    rho: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let innovation = (1.0 - rho * rho).sqrt();
    let noise = Normal::new(0.0, sigma_db).expect("sigma >= 0");
    let mut sinr = Vec::with_capacity(index.num_links());
    for (e, &(i, j)) in index.pairs().iter().enumerate() {
        shadow_db[e] = rho * shadow_db[e] + innovation * noise.sample(rng);
        let a = positions[i];
        let b = positions[j];
        let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt();
        sinr.push(shadowed_snr(radio, d, shadow_db[e]));
    }
    sinr
}

/// Stationary initial shadowing state, N(0, sigma^2) per link.
pub fn init_shadowing(
    sigma_db: f64,
    num_links: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let noise = Normal::new(0.0, sigma_db).expect("sigma >= 0");
    (0..num_links).map(|_| noise.sample(rng)).collect()
}

/// Precomputed environment of one run: node positions and per-link SINR for
/// every step. Generated purely from the scenario's mobility and shadowing
/// streams, before any control decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldTrace {
    pub positions: Vec<Vec<[f64; 3]>>,
    pub sinr: Vec<Vec<f64>>,
}

struct NodeMotion {
    waypoint: [f64; 3],
    speed: f64,
    pause_left: f64,
}

fn draw_waypoint(mobility: &MobilityParams, rng: &mut ChaCha8Rng) -> [f64; 3] {
    let mut p = [0.0; 3];
    for axis in 0..3 {
        let lo = mobility.area_min[axis];
        let hi = mobility.area_max[axis];
        p[axis] = if hi > lo { rng.gen_range(lo..hi) } else { lo };
    }
    p
}

fn draw_speed(mobility: &MobilityParams, rng: &mut ChaCha8Rng) -> f64 {
    if mobility.max_speed_mps <= 0.0 {
        return 0.0;
    }
    rng.gen_range(0.1..=1.0) * mobility.max_speed_mps
}

impl WorldTrace {
    pub fn generate(scenario: &ScenarioSpec, index: &LinkIndex) -> Result<Self, SimError> {
        scenario.validate()?;
        let steps = scenario.num_steps();
        let n = scenario.snapshot.num_nodes();
        let mut mobility_rng = stream_rng(scenario.seed, "mobility");
        let mut shadow_rng = stream_rng(scenario.seed, "shadowing");

        let mut motions: Vec<NodeMotion> = (0..n)
            .map(|_| NodeMotion {
                waypoint: draw_waypoint(&scenario.mobility, &mut mobility_rng),
                speed: draw_speed(&scenario.mobility, &mut mobility_rng),
                pause_left: 0.0,
            })
            .collect();

        let mut positions = Vec::with_capacity(steps + 1);
        let mut sinr = Vec::with_capacity(steps + 1);
        let mut current = scenario.snapshot.nodes.clone();
        let mut shadow = init_shadowing(
            scenario.shadowing_sigma_db,
            index.num_links(),
            &mut shadow_rng,
        );
        // t = 0: initial placement with stationary shadowing.
        positions.push(current.clone());
        sinr.push({
            let mut first = Vec::with_capacity(index.num_links());
            for &(i, j) in index.pairs() {
                let a = current[i];
                let b = current[j];
                let d = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2))
                    .sqrt();
                first.push(shadowed_snr(&scenario.snapshot.radio, d, shadow[index.edge_id(i, j).expect("indexed pair")]));
            }
            first
        });

        for _ in 1..=steps {
            for (node, motion) in motions.iter_mut().enumerate() {
                if motion.pause_left > 0.0 {
                    motion.pause_left -= scenario.step_s;
                    continue;
                }
                let pos = &mut current[node];
                let dx = motion.waypoint[0] - pos[0];
                let dy = motion.waypoint[1] - pos[1];
                let dz = motion.waypoint[2] - pos[2];
                let dist = (dx * dx + dy * dy + dz * dz).sqrt();
                let reach = motion.speed * scenario.step_s;
                if dist <= reach || dist == 0.0 {
                    *pos = motion.waypoint;
                    motion.pause_left = scenario.mobility.waypoint_pause_s;
                    motion.waypoint = draw_waypoint(&scenario.mobility, &mut mobility_rng);
                    motion.speed = draw_speed(&scenario.mobility, &mut mobility_rng);
                } else {
                    pos[0] += dx / dist * reach;
                    pos[1] += dy / dist * reach;
                    pos[2] += dz / dist * reach;
                }
            }
            let step_sinr = step_channel(
                &scenario.snapshot.radio,
                index,
                &current,
                &mut shadow,
                scenario.shadowing_sigma_db,
                scenario.shadowing_rho,
                &mut shadow_rng,
            );
            positions.push(current.clone());
            sinr.push(step_sinr);
        }
        Ok(Self { positions, sinr })
    }
}

/// Per-link effective rates under TDMA: an active link `(i, j)` gets
/// `C_ij(t) * min(1/deg_i, 1/deg_j)` where `deg` counts the node's active
/// links; links in outage carry nothing.
pub fn effective_rates(
    topology: &Topology,
    caps_t: &[f64],
    outage_mask: &[bool],
    index: &LinkIndex,
) -> Vec<f64> {
    let mut degree = vec![0usize; index.num_nodes()];
    for e in topology.active_links() {
        let (i, j) = index.pair(e);
        degree[i] += 1;
        degree[j] += 1;
    }
    let mut rates = vec![0.0; index.num_links()];
    for e in topology.active_links() {
        if outage_mask[e] {
            continue;
        }
        let (i, j) = index.pair(e);
        let share = (1.0 / degree[i] as f64).min(1.0 / degree[j] as f64);
        rates[e] = caps_t[e] * share;
    }
    rates
}

/// Network throughput of a topology under TDMA at one instant.
pub fn tdma_throughput(
    topology: &Topology,
    state: &LinkStateSample,
    caps_t: &[f64],
    index: &LinkIndex,
) -> f64 {
    effective_rates(topology, caps_t, &state.outage_mask, index)
        .iter()
        .sum()
}

/// Drains one step of energy: idle draw plus the transmit cost of the bits
/// carried on incident links, floored at zero.
pub fn step_energy(
    energy: &mut [f64],
    rates: &[f64],
    index: &LinkIndex,
    params: &EnergyParams,
    step_s: f64,
) {
    for (node, e) in energy.iter_mut().enumerate() {
        let bits_per_s: f64 = index.incident(node).iter().map(|&l| rates[l]).sum();
        let drain = (params.idle_w + params.tx_j_per_bit * bits_per_s) * step_s;
        *e = (*e - drain).max(0.0);
    }
}

/// One step of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: f64,
    pub topology_index: usize,
    pub throughput_bps: f64,
    pub switched: bool,
    pub outage_links: usize,
    pub min_energy_j: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSummary {
    /// Performance retention; absent when the scenario is degenerate.
    pub pr: Option<f64>,
    /// True when thr(0) = 0 and PR is undefined.
    pub degenerate: bool,
    pub thr0_bps: f64,
    pub num_switches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimTrace {
    pub records: Vec<StepRecord>,
    pub summary: SimSummary,
}

/// Time-averaged throughput normalized to the first step:
/// `PR = (1/T) * sum_t thr(t) / thr(0)`. `None` when `thr0` is zero.
///
/// The numerator uses compensated summation so a constant series yields
/// exactly 1.0: the compensated sum of T copies of `thr0` and the product
/// `thr0 * T` round to the same double.
pub fn performance_retention(thr0: f64, series: &[f64]) -> Option<f64> {
    if thr0 == 0.0 || series.is_empty() {
        return None;
    }
    // Neumaier summation.
    let mut sum = 0.0f64;
    let mut compensation = 0.0f64;
    for &thr in series {
        let t = sum + thr;
        if sum.abs() >= thr.abs() {
            compensation += (sum - t) + thr;
        } else {
            compensation += (thr - t) + sum;
        }
        sum = t;
    }
    Some((sum + compensation) / (thr0 * series.len() as f64))
}

impl SimTrace {
    /// PR recomputed from the records; must agree with the summary.
    pub fn recompute_pr(&self) -> Option<f64> {
        let thr0 = self.records.first()?.throughput_bps;
        let series: Vec<f64> = self.records[1..]
            .iter()
            .map(|r| r.throughput_bps)
            .collect();
        performance_retention(thr0, &series)
    }

    /// CSV export: one row per step.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,thr,topo_idx,switched,min_energy\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                r.t,
                r.throughput_bps,
                r.topology_index,
                u8::from(r.switched),
                r.min_energy_j,
            ));
        }
        out
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Mode {
    Dynamic,
    Static,
}

fn argmax_utility(
    cset: &CandidateSet,
    state: &LinkStateSample,
    index: &LinkIndex,
    weights: &UtilityWeights,
) -> Result<usize, SimError> {
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, entry) in cset.entries.iter().enumerate() {
        let score = utility_score(&entry.topology, state, index, weights)?;
        if score > best_score {
            best_score = score;
            best = i;
        }
    }
    Ok(best)
}

fn sample_without_replacement(
    pool: &[usize],
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut items = pool.to_vec();
    let take = count.min(items.len());
    let mut picked = Vec::with_capacity(take);
    for _ in 0..take {
        let idx = rng.gen_range(0..items.len());
        picked.push(items.swap_remove(idx));
    }
    picked
}

fn run(
    scenario: &ScenarioSpec,
    cset: &CandidateSet,
    weights: &UtilityWeights,
    policy: &SwitchPolicy,
    mode: Mode,
) -> Result<SimTrace, SimError> {
    scenario.validate()?;
    if cset.is_empty() {
        return Err(SimError::EmptyCandidates);
    }
    let index = build_link_index(&scenario.snapshot)?;
    if cset.dim() != index.num_links() {
        return Err(SimError::DimensionMismatch {
            expected: index.num_links(),
            actual: cset.dim(),
        });
    }
    let steps = scenario.num_steps();
    let world = WorldTrace::generate(scenario, &index)?;
    let mut disturbance_rng = stream_rng(scenario.seed, "disturbance");

    let num_links = index.num_links();
    let mut energy = vec![scenario.energy.initial_j; scenario.snapshot.num_nodes()];
    let mut outage_until = vec![0usize; num_links];
    let mut fired = vec![false; scenario.disturbances.len()];
    let mut current = 0usize;
    let mut last_switch_step = 0usize;
    let mut switch_outage_left = 0usize;
    let mut num_switches = 0usize;
    let mut records = Vec::with_capacity(steps + 1);

    for t_idx in 0..=steps {
        let t_s = t_idx as f64 * scenario.step_s;
        let sinr = &world.sinr[t_idx];
        let caps_t: Vec<f64> = sinr
            .iter()
            .map(|&gamma| capacity_bps(&scenario.snapshot.radio, gamma))
            .collect();
        let mut outage: Vec<bool> = (0..num_links).map(|e| outage_until[e] > t_idx).collect();
        for e in 0..num_links {
            let (i, j) = index.pair(e);
            if energy[i] <= 0.0 || energy[j] <= 0.0 {
                outage[e] = true;
            }
        }
        let state = LinkStateSample {
            time_s: t_s,
            sinr_linear: sinr.clone(),
            energy_j: energy.clone(),
            outage_mask: outage.clone(),
        };

        let mut switched = false;
        if t_idx == 0 {
            current = argmax_utility(cset, &state, &index, weights)?;
        } else if mode == Mode::Dynamic {
            let dwell = (t_idx - last_switch_step) as f64 * scenario.step_s;
            let sel = select_topology(cset, &state, &index, weights, current, dwell, policy)?;
            if sel.switched {
                current = sel.selected;
                last_switch_step = t_idx;
                switch_outage_left = policy.switch_outage_steps;
                num_switches += 1;
                switched = true;
            }
        }
        let topology = &cset.entries[current].topology;

        // Disturbances strike after selection: the selector reacts one step
        // later, which is what produces the dip-and-recover shape.
        for (d_idx, d) in scenario.disturbances.iter().enumerate() {
            if fired[d_idx] {
                continue;
            }
            let event_step = (d.time_s / scenario.step_s).ceil() as usize;
            if t_idx == event_step {
                fired[d_idx] = true;
                let live: Vec<usize> =
                    topology.active_links().filter(|&e| !outage[e]).collect();
                let hit_count = (d.affected_fraction * live.len() as f64).ceil() as usize;
                for e in sample_without_replacement(&live, hit_count, &mut disturbance_rng) {
                    outage_until[e] = t_idx + d.duration_steps;
                    outage[e] = true;
                }
            }
        }

        let rates = if switch_outage_left > 0 {
            switch_outage_left -= 1;
            vec![0.0; num_links]
        } else {
            effective_rates(topology, &caps_t, &outage, &index)
        };
        let throughput: f64 = rates.iter().sum();
        step_energy(&mut energy, &rates, &index, &scenario.energy, scenario.step_s);

        records.push(StepRecord {
            t: t_s,
            topology_index: current,
            throughput_bps: throughput,
            switched,
            outage_links: outage.iter().filter(|&&o| o).count(),
            min_energy_j: energy.iter().copied().fold(f64::INFINITY, f64::min),
        });
    }

    let thr0 = records[0].throughput_bps;
    let series: Vec<f64> = records[1..].iter().map(|r| r.throughput_bps).collect();
    let pr = performance_retention(thr0, &series);
    Ok(SimTrace {
        summary: SimSummary {
            pr,
            degenerate: pr.is_none(),
            thr0_bps: thr0,
            num_switches,
        },
        records,
    })
}

/// Runs the two-stage arm: per step, select among the candidates, apply the
/// switch outage, and record TDMA throughput.
pub fn run_dynamic(
    scenario: &ScenarioSpec,
    cset: &CandidateSet,
    weights: &UtilityWeights,
    policy: &SwitchPolicy,
) -> Result<SimTrace, SimError> {
    run(scenario, cset, weights, policy, Mode::Dynamic)
}

/// Runs the baseline arm: the same loop with selection disabled, flying the
/// given fixed topology for the whole horizon.
pub fn run_static(scenario: &ScenarioSpec, single: &Topology) -> Result<SimTrace, SimError> {
    let cset = CandidateSet {
        snapshot_id: scenario.snapshot.id(),
        entries: vec![CandidateEntry {
            topology: single.clone(),
            base_objective: 0.0,
            round: 0,
            sample_index: 0,
        }],
    };
    run(
        scenario,
        &cset,
        &UtilityWeights::default(),
        &SwitchPolicy::default(),
        Mode::Static,
    )
}
