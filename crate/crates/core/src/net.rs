//! Network model: UAV snapshots, link indexing, free-space channel capacities,
//! and the binary topology vector shared by the optimizer and the simulator.
//!
//! Everything here is immutable after construction and safe to share across
//! threads; the operations are pure functions of their inputs.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// Coincident or near-coincident nodes are clamped to this separation
/// before path loss so the SNR stays finite.
pub const MIN_LINK_DISTANCE_M: f64 = 1.0;

/// Friis free-space constant for distance in meters and frequency in Hz:
/// FSPL(dB) = 20 log10(d) + 20 log10(f) - 147.55.
const FSPL_CONST_DB: f64 = 147.55;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("invalid snapshot: {0}")]
    InvalidSnapshot(String),
    #[error("node {node} out of range (snapshot has {nodes} nodes)")]
    NodeOutOfRange { node: usize, nodes: usize },
    #[error("{context}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
}

/// Radio front-end parameters shared by all links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioParams {
    pub tx_power_dbm: f64,
    pub bandwidth_hz: f64,
    pub noise_dbm: f64,
    pub carrier_freq_hz: f64,
    /// Shannon capacity gap Gamma (>= 1, dimensionless).
    pub capacity_gap: f64,
    /// Optional hard cutoff: pairs farther apart than this are not indexed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_range_m: Option<f64>,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            tx_power_dbm: 20.0,
            bandwidth_hz: 1.0,
            noise_dbm: -90.0,
            carrier_freq_hz: 2.4e9,
            capacity_gap: 2.0,
            max_range_m: None,
        }
    }
}

/// A spatial snapshot of the swarm: node positions plus radio parameters.
///
/// Serialized as `{"nodes": [[x,y,z], ...], "radio": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSnapshot {
    pub nodes: Vec<[f64; 3]>,
    pub radio: RadioParams,
}

impl NetworkSnapshot {
    pub fn new(nodes: Vec<[f64; 3]>, radio: RadioParams) -> Result<Self, NetError> {
        let snap = Self { nodes, radio };
        snap.validate()?;
        Ok(snap)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.nodes.len() < 2 {
            return Err(NetError::InvalidSnapshot(format!(
                "need at least 2 nodes, got {}",
                self.nodes.len()
            )));
        }
        if !(self.radio.bandwidth_hz > 0.0) {
            return Err(NetError::InvalidSnapshot(format!(
                "bandwidth must be positive, got {}",
                self.radio.bandwidth_hz
            )));
        }
        if !(self.radio.capacity_gap >= 1.0) {
            return Err(NetError::InvalidSnapshot(format!(
                "capacity gap must be >= 1, got {}",
                self.radio.capacity_gap
            )));
        }
        if !(self.radio.carrier_freq_hz > 0.0) {
            return Err(NetError::InvalidSnapshot(
                "carrier frequency must be positive".into(),
            ));
        }
        for (i, p) in self.nodes.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(NetError::InvalidSnapshot(format!(
                    "node {i} has a non-finite coordinate"
                )));
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        let a = self.nodes[i];
        let b = self.nodes[j];
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    /// Content hash of the canonical JSON form; used to tie candidate sets
    /// back to the snapshot they were generated for.
    pub fn id(&self) -> String {
        let json = serde_json::to_string(self).expect("snapshot serializes");
        let digest = Sha256::digest(json.as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, NetError> {
        let snap: Self = serde_json::from_str(text)
            .map_err(|e| NetError::InvalidSnapshot(format!("parse error: {e}")))?;
        snap.validate()?;
        Ok(snap)
    }
}

/// Deterministic edge numbering over node pairs `(i, j)` with `i < j`,
/// ordered lexicographically. Pairs beyond `max_range_m` are excluded.
#[derive(Debug, Clone)]
pub struct LinkIndex {
    pairs: Vec<(usize, usize)>,
    edge_of: HashMap<(usize, usize), usize>,
    incident: Vec<Vec<usize>>,
    num_nodes: usize,
}

impl LinkIndex {
    pub fn num_links(&self) -> usize {
        self.pairs.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn pair(&self, edge: usize) -> (usize, usize) {
        self.pairs[edge]
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Edge id for an unordered node pair, if indexed.
    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edge_of.get(&key).copied()
    }

    /// Edge ids incident to a node.
    pub fn incident(&self, node: usize) -> &[usize] {
        &self.incident[node]
    }
}

/// Builds the link index for a snapshot: every unordered in-range pair,
/// lexicographic order.
pub fn build_link_index(snapshot: &NetworkSnapshot) -> Result<LinkIndex, NetError> {
    snapshot.validate()?;
    let n = snapshot.num_nodes();
    let mut pairs = Vec::new();
    let mut edge_of = HashMap::new();
    let mut incident = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if let Some(range) = snapshot.radio.max_range_m {
                if snapshot.distance(i, j) > range {
                    continue;
                }
            }
            let edge = pairs.len();
            pairs.push((i, j));
            edge_of.insert((i, j), edge);
            incident[i].push(edge);
            incident[j].push(edge);
        }
    }
    Ok(LinkIndex {
        pairs,
        edge_of,
        incident,
        num_nodes: n,
    })
}

/// One topology: the binary activation vector over indexed links.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Topology {
    bits: Vec<u8>,
}

impl Topology {
    pub fn zeros(num_links: usize) -> Self {
        Self {
            bits: vec![0; num_links],
        }
    }

    pub fn ones(num_links: usize) -> Self {
        Self {
            bits: vec![1; num_links],
        }
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self, NetError> {
        if let Some(bad) = bits.iter().find(|&&b| b > 1) {
            return Err(NetError::InvalidSnapshot(format!(
                "topology bits must be 0 or 1, got {bad}"
            )));
        }
        Ok(Self { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn is_active(&self, edge: usize) -> bool {
        self.bits[edge] == 1
    }

    pub fn set(&mut self, edge: usize, active: bool) {
        self.bits[edge] = u8::from(active);
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn active_links(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == 1)
            .map(|(e, _)| e)
    }

    pub fn active_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b == 1).count()
    }

    pub fn hamming_distance(&self, other: &Topology) -> usize {
        debug_assert_eq!(self.len(), other.len());
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Per-link capacities and linear SNRs for one snapshot.
#[derive(Debug, Clone)]
pub struct CapacityTable {
    /// Shannon capacity per link, bits/s.
    pub cap: Vec<f64>,
    /// Linear SNR per link.
    pub snr: Vec<f64>,
}

pub fn fspl_db(distance_m: f64, freq_hz: f64) -> f64 {
    let d = distance_m.max(MIN_LINK_DISTANCE_M);
    20.0 * d.log10() + 20.0 * freq_hz.log10() - FSPL_CONST_DB
}

/// Linear SNR at a given distance under free-space path loss.
pub fn snr_at_distance(radio: &RadioParams, distance_m: f64) -> f64 {
    let rx_dbm = radio.tx_power_dbm - fspl_db(distance_m, radio.carrier_freq_hz);
    10f64.powf((rx_dbm - radio.noise_dbm) / 10.0)
}

/// Gap-adjusted Shannon capacity in bits/s: B * log2(1 + snr / Gamma).
pub fn capacity_bps(radio: &RadioParams, snr_linear: f64) -> f64 {
    radio.bandwidth_hz * (1.0 + snr_linear / radio.capacity_gap).log2()
}

pub fn compute_capacities(
    snapshot: &NetworkSnapshot,
    index: &LinkIndex,
) -> Result<CapacityTable, NetError> {
    snapshot.validate()?;
    let mut cap = Vec::with_capacity(index.num_links());
    let mut snr = Vec::with_capacity(index.num_links());
    for &(i, j) in index.pairs() {
        let gamma = snr_at_distance(&snapshot.radio, snapshot.distance(i, j));
        snr.push(gamma);
        cap.push(capacity_bps(&snapshot.radio, gamma));
    }
    Ok(CapacityTable { cap, snr })
}

/// Sum of capacities of active links incident to `node`.
pub fn node_load(
    topology: &Topology,
    caps: &CapacityTable,
    index: &LinkIndex,
    node: usize,
) -> Result<f64, NetError> {
    if node >= index.num_nodes() {
        return Err(NetError::NodeOutOfRange {
            node,
            nodes: index.num_nodes(),
        });
    }
    if topology.len() != index.num_links() {
        return Err(NetError::DimensionMismatch {
            context: "topology",
            expected: index.num_links(),
            actual: topology.len(),
        });
    }
    if caps.cap.len() != index.num_links() {
        return Err(NetError::DimensionMismatch {
            context: "capacity table",
            expected: index.num_links(),
            actual: caps.cap.len(),
        });
    }
    Ok(index
        .incident(node)
        .iter()
        .filter(|&&e| topology.is_active(e))
        .map(|&e| caps.cap[e])
        .sum())
}
