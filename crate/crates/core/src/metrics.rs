//! Diversity and robustness metrics, centralization-scenario generation
//! (families I0 through I4), the fragility-weight sweep, and batch
//! statistics with t-distribution confidence intervals.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::net::{
    build_link_index, compute_capacities, node_load, CapacityTable, LinkIndex, NetError,
    NetworkSnapshot, RadioParams, Topology,
};
use crate::qubo::{build_qubo, evaluate_decomposed, ObjectiveParams, QuboError};
use crate::sampler::{Sampler, SamplerConfig, SamplerError};
use crate::sim::stream_rng;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("diversity needs at least 2 topologies, got {0}")]
    TooFewTopologies(usize),
    #[error("topologies have mismatched lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("batch statistics need at least 2 runs, got {0}")]
    TooFewRuns(usize),
    #[error("confidence must lie in (0, 1), got {0}")]
    BadConfidence(f64),
    #[error(
        "scenario generation for {family} (target max betweenness {target}) failed after \
         {attempts} attempts; last measured {last_measured:.3}, connected: {last_connected}"
    )]
    GenerationFailed {
        family: String,
        target: f64,
        attempts: usize,
        last_measured: f64,
        last_connected: bool,
    },
    #[error("scenario generation needs at least 4 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("betas must be sorted ascending")]
    UnsortedBetas,
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Mean pairwise Hamming distance over all unordered pairs, normalized by
/// the link count, in [0, 1].
pub fn diversity(set: &[Topology]) -> Result<f64, MetricsError> {
    if set.len() < 2 {
        return Err(MetricsError::TooFewTopologies(set.len()));
    }
    let links = set[0].len();
    for t in set {
        if t.len() != links {
            return Err(MetricsError::LengthMismatch(links, t.len()));
        }
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for (i, a) in set.iter().enumerate() {
        for b in &set[i + 1..] {
            total += a.hamming_distance(b) as f64 / links.max(1) as f64;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Population standard deviation of the per-node capacity-weighted load.
pub fn load_std(topology: &Topology, caps: &CapacityTable, index: &LinkIndex) -> f64 {
    let n = index.num_nodes();
    let loads: Vec<f64> = (0..n)
        .map(|node| node_load(topology, caps, index, node).expect("consistent dimensions"))
        .collect();
    let mean = loads.iter().sum::<f64>() / n as f64;
    let var = loads.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n as f64;
    var.sqrt()
}

/// Normalized node betweenness of the graph induced by a topology, plus a
/// connectivity flag; disconnected graphs are scored on the union of their
/// components.
#[derive(Debug, Clone, PartialEq)]
pub struct BetweennessReport {
    /// Per-node betweenness, normalized by (N-1)(N-2)/2.
    pub per_node: Vec<f64>,
    pub max: f64,
    pub connected: bool,
}

/// Brandes' algorithm on the unweighted undirected graph of active links.
pub fn betweenness(topology: &Topology, index: &LinkIndex, num_nodes: usize) -> BetweennessReport {
    let mut adjacency = vec![Vec::new(); num_nodes];
    for e in topology.active_links() {
        let (i, j) = index.pair(e);
        adjacency[i].push(j);
        adjacency[j].push(i);
    }
    let mut centrality = vec![0.0f64; num_nodes];
    let mut reached_from_zero = 1usize;
    for source in 0..num_nodes {
        let mut stack = Vec::with_capacity(num_nodes);
        let mut predecessors: Vec<Vec<usize>> = vec![Vec::new(); num_nodes];
        let mut sigma = vec![0.0f64; num_nodes];
        let mut dist = vec![-1i64; num_nodes];
        sigma[source] = 1.0;
        dist[source] = 0;
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            for &w in &adjacency[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    predecessors[w].push(v);
                }
            }
        }
        if source == 0 {
            reached_from_zero = stack.len();
        }
        let mut delta = vec![0.0f64; num_nodes];
        while let Some(w) = stack.pop() {
            for &v in &predecessors[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != source {
                centrality[w] += delta[w];
            }
        }
    }
    let connected = reached_from_zero == num_nodes;
    // Each unordered pair was counted from both endpoints.
    let norm = if num_nodes > 2 {
        1.0 / ((num_nodes - 1) as f64 * (num_nodes - 2) as f64)
    } else {
        0.0
    };
    for c in &mut centrality {
        *c *= norm;
    }
    let max = centrality.iter().copied().fold(0.0f64, f64::max);
    BetweennessReport {
        per_node: centrality,
        max,
        connected,
    }
}

/// Max normalized betweenness plus the connectivity flag.
pub fn max_betweenness(topology: &Topology, index: &LinkIndex, num_nodes: usize) -> (f64, bool) {
    let report = betweenness(topology, index, num_nodes);
    (report.max, report.connected)
}

/// Centralization families: the target maximum normalized betweenness of
/// the throughput-optimal topology rises from 0.2 (I0) to 1.0 (I4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyLabel {
    I0,
    I1,
    I2,
    I3,
    I4,
}

impl FamilyLabel {
    pub const ALL: [FamilyLabel; 5] = [
        FamilyLabel::I0,
        FamilyLabel::I1,
        FamilyLabel::I2,
        FamilyLabel::I3,
        FamilyLabel::I4,
    ];

    pub fn target_betweenness(self) -> f64 {
        match self {
            FamilyLabel::I0 => 0.2,
            FamilyLabel::I1 => 0.4,
            FamilyLabel::I2 => 0.6,
            FamilyLabel::I3 => 0.8,
            FamilyLabel::I4 => 1.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            FamilyLabel::I0 => 0,
            FamilyLabel::I1 => 1,
            FamilyLabel::I2 => 2,
            FamilyLabel::I3 => 3,
            FamilyLabel::I4 => 4,
        }
    }
}

impl std::str::FromStr for FamilyLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "I0" => Ok(FamilyLabel::I0),
            "I1" => Ok(FamilyLabel::I1),
            "I2" => Ok(FamilyLabel::I2),
            "I3" => Ok(FamilyLabel::I3),
            "I4" => Ok(FamilyLabel::I4),
            other => Err(format!(
                "unknown scenario family {other:?}; valid families: I0, I1, I2, I3, I4"
            )),
        }
    }
}

impl std::fmt::Display for FamilyLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "I{}", self.index())
    }
}

/// A family with its hub-bias knob (0 = uniform placement, 1 = pure
/// hub-and-spoke).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioFamily {
    pub label: FamilyLabel,
    pub hub_bias: f64,
}

impl ScenarioFamily {
    pub fn new(label: FamilyLabel) -> Self {
        Self {
            label,
            hub_bias: label.index() as f64 / 4.0,
        }
    }
}

/// Link range of generated scenarios, meters.
const GEN_RANGE_M: f64 = 150.0;
const GEN_HUB: [f64; 3] = [0.0, 0.0, 200.0];
/// Generation acceptance window around the family target.
const GEN_TOLERANCE: f64 = 0.15;
const GEN_MAX_ATTEMPTS: usize = 50;
/// Cluster centers sit at this fraction of the range from the hub.
const GEN_CLUSTER_ORBIT: f64 = 0.78;
/// Cluster members stay within this fraction of the range of their center.
const GEN_CLUSTER_RADIUS: f64 = 0.08;

/// Unit icosahedron vertices: 12 directions pairwise at least 63.4 degrees
/// apart, so spokes placed just inside the hub's range stay out of range of
/// each other.
fn icosahedron_directions() -> Vec<[f64; 3]> {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let norm = (1.0 + phi * phi).sqrt();
    let mut dirs = Vec::with_capacity(12);
    for &s0 in &[1.0, -1.0] {
        for &s1 in &[1.0, -1.0] {
            dirs.push([0.0, s0 / norm, s1 * phi / norm]);
            dirs.push([s0 / norm, s1 * phi / norm, 0.0]);
            dirs.push([s0 * phi / norm, 0.0, s1 / norm]);
        }
    }
    dirs
}

/// Well-separated cluster directions: pairwise angles of 180, 120, and
/// 109.5 degrees keep clusters on a 0.78-range orbit out of range of each
/// other while every member stays in range of the hub.
fn cluster_directions(groups: usize) -> Vec<[f64; 3]> {
    match groups {
        1 => vec![[1.0, 0.0, 0.0]],
        2 => vec![[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]],
        3 => (0..3)
            .map(|i| {
                let angle = i as f64 * std::f64::consts::TAU / 3.0;
                [angle.cos(), angle.sin(), 0.0]
            })
            .collect(),
        4 => {
            let s = 1.0 / 3f64.sqrt();
            vec![
                [s, s, s],
                [s, -s, -s],
                [-s, s, -s],
                [-s, -s, s],
            ]
        }
        _ => icosahedron_directions(),
    }
}

/// All partitions of `n` into between 2 and `max_parts` descending parts.
fn partitions(n: usize, max_parts: usize) -> Vec<Vec<usize>> {
    fn recurse(rest: usize, cap: usize, parts_left: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest == 0 {
            if current.len() >= 2 {
                out.push(current.clone());
            }
            return;
        }
        if parts_left == 0 {
            return;
        }
        for size in (1..=cap.min(rest)).rev() {
            current.push(size);
            recurse(rest - size, size, parts_left - 1, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    recurse(n, n, max_parts, &mut Vec::new(), &mut out);
    out
}

/// Max betweenness of the hub when the other `n - 1` nodes form isolated
/// cliques of the given sizes, all bridged only by the hub: every
/// cross-clique pair routes through it.
fn predicted_hub_betweenness(sizes: &[usize], n: usize) -> f64 {
    let total: usize = sizes.iter().sum();
    let squares: usize = sizes.iter().map(|s| s * s).sum();
    let cross_pairs = (total * total - squares) as f64 / 2.0;
    cross_pairs / ((n - 1) as f64 * (n - 2) as f64 / 2.0)
}

/// The clique-size layout whose predicted hub betweenness lands closest to
/// the family target. Up to four separated clusters fit around one hub; the
/// pure star (every node a singleton spoke) covers the fully centralized
/// end for swarms of up to 13 nodes.
fn choose_layout(target: f64, n: usize) -> Vec<usize> {
    let mut candidates = partitions(n - 1, 4);
    if n - 1 <= 12 {
        candidates.push(vec![1; n - 1]);
    }
    candidates
        .into_iter()
        .min_by(|a, b| {
            let da = (predicted_hub_betweenness(a, n) - target).abs();
            let db = (predicted_hub_betweenness(b, n) - target).abs();
            da.partial_cmp(&db).expect("finite")
        })
        .expect("n >= 4 yields candidates")
}

/// Generates a snapshot whose throughput-optimal topology (all in-range
/// links active) has max betweenness within the family's acceptance window,
/// retrying with fresh placements up to 50 times.
///
/// Family I0 places nodes uniformly; the others arrange separated clusters
/// around a relay hub sized to hit the target. I4's pure star needs at most
/// 12 spokes, so fully centralized scenarios are limited to 13 nodes.
pub fn gen_scenario(
    family: &ScenarioFamily,
    n: usize,
    seed: u64,
) -> Result<NetworkSnapshot, MetricsError> {
    if n < 4 {
        return Err(MetricsError::TooFewNodes(n));
    }
    let target = family.label.target_betweenness();
    let layout = if family.hub_bias == 0.0 {
        Vec::new()
    } else {
        choose_layout(target, n)
    };
    let mut last_measured = 0.0;
    let mut last_connected = false;
    for attempt in 0..GEN_MAX_ATTEMPTS {
        let mut rng = stream_rng(seed.wrapping_add(attempt as u64), "scenario-gen");
        let mut nodes = Vec::with_capacity(n);
        nodes.push(GEN_HUB);
        if layout.is_empty() {
            // Uniform placement in a box wide enough that not every pair is
            // in range.
            for _ in 1..n {
                nodes.push([
                    GEN_HUB[0] + rng.gen_range(-1.0..1.0) * GEN_RANGE_M,
                    GEN_HUB[1] + rng.gen_range(-1.0..1.0) * GEN_RANGE_M,
                    GEN_HUB[2] + rng.gen_range(-0.27..0.27) * GEN_RANGE_M,
                ]);
            }
        } else if layout.iter().all(|&s| s == 1) {
            // Pure star: spokes just inside the hub's range along
            // icosahedron directions, pairwise out of range.
            let mut dirs = icosahedron_directions();
            dirs.shuffle(&mut rng);
            let jitter = Normal::new(0.0, 0.015).expect("fixed sigma");
            for &base in dirs.iter().cycle().take(layout.len()) {
                let mut dir = [
                    base[0] + jitter.sample(&mut rng),
                    base[1] + jitter.sample(&mut rng),
                    base[2] + jitter.sample(&mut rng),
                ];
                let len = (dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]).sqrt();
                for c in &mut dir {
                    *c /= len;
                }
                let radius = rng.gen_range(0.955..0.985) * GEN_RANGE_M;
                nodes.push([
                    GEN_HUB[0] + dir[0] * radius,
                    GEN_HUB[1] + dir[1] * radius,
                    GEN_HUB[2] + dir[2] * radius,
                ]);
            }
        } else {
            // Separated clusters: tight cliques on a 0.78-range orbit, in
            // range of the hub, out of range of each other.
            let dirs = cluster_directions(layout.len());
            for (group, &size) in layout.iter().enumerate() {
                let dir = dirs[group % dirs.len()];
                let center = [
                    GEN_HUB[0] + dir[0] * GEN_CLUSTER_ORBIT * GEN_RANGE_M,
                    GEN_HUB[1] + dir[1] * GEN_CLUSTER_ORBIT * GEN_RANGE_M,
                    GEN_HUB[2] + dir[2] * GEN_CLUSTER_ORBIT * GEN_RANGE_M,
                ];
                for _ in 0..size {
                    // Uniform in the member ball by rejection.
                    let max_r = GEN_CLUSTER_RADIUS * GEN_RANGE_M;
                    let offset = loop {
                        let v = [
                            rng.gen_range(-max_r..=max_r),
                            rng.gen_range(-max_r..=max_r),
                            rng.gen_range(-max_r..=max_r),
                        ];
                        if v[0] * v[0] + v[1] * v[1] + v[2] * v[2] <= max_r * max_r {
                            break v;
                        }
                    };
                    nodes.push([
                        center[0] + offset[0],
                        center[1] + offset[1],
                        center[2] + offset[2],
                    ]);
                }
            }
        }
        let radio = RadioParams {
            max_range_m: Some(GEN_RANGE_M),
            ..RadioParams::default()
        };
        let snapshot = NetworkSnapshot { nodes, radio };
        let index = build_link_index(&snapshot)?;
        if index.num_links() == 0 {
            continue;
        }
        // With beta = 0 every link has a negative diagonal and no coupling,
        // so the throughput-optimal topology is all links on.
        let optimal = Topology::ones(index.num_links());
        let (measured, connected) = max_betweenness(&optimal, &index, n);
        last_measured = measured;
        last_connected = connected;
        if connected && (measured - target).abs() <= GEN_TOLERANCE {
            return Ok(snapshot);
        }
    }
    Err(MetricsError::GenerationFailed {
        family: family.label.to_string(),
        target,
        attempts: GEN_MAX_ATTEMPTS,
        last_measured,
        last_connected,
    })
}

/// One row of the fragility-weight sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaSweepRow {
    pub beta: f64,
    pub mean_throughput: f64,
    pub mean_load_std: f64,
}

/// For each beta, solves the QUBO once per seed and averages the initial
/// throughput and nodal load spread of the best sampled topology.
pub fn beta_sweep(
    snapshot: &NetworkSnapshot,
    betas: &[f64],
    sampler: &dyn Sampler,
    base_cfg: &SamplerConfig,
    seeds: &[u64],
    alpha: f64,
) -> Result<Vec<BetaSweepRow>, MetricsError> {
    if betas.windows(2).any(|w| w[0] > w[1]) {
        return Err(MetricsError::UnsortedBetas);
    }
    let index = build_link_index(snapshot)?;
    let caps = compute_capacities(snapshot, &index)?;
    let mut rows = Vec::with_capacity(betas.len());
    for &beta in betas {
        let params = ObjectiveParams::new(alpha, beta)?;
        let q = build_qubo(snapshot, &index, &caps, &params)?;
        let mut throughput_sum = 0.0;
        let mut load_std_sum = 0.0;
        for &seed in seeds {
            let cfg = base_cfg.with_seed(seed);
            let batch = sampler.sample(&q, &cfg)?;
            let best = &batch.topologies[batch.best()];
            let decomposed = evaluate_decomposed(best, &caps, &index, &params)?;
            throughput_sum += decomposed.throughput;
            load_std_sum += load_std(best, &caps, &index);
        }
        rows.push(BetaSweepRow {
            beta,
            mean_throughput: throughput_sum / seeds.len() as f64,
            mean_load_std: load_std_sum / seeds.len() as f64,
        });
    }
    Ok(rows)
}

/// Mean, sample standard deviation, and two-sided t confidence interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchStats {
    pub mean: f64,
    pub std: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub n: usize,
    pub confidence: f64,
}

pub fn summarize(runs: &[f64], confidence: f64) -> Result<BatchStats, MetricsError> {
    if runs.len() < 2 {
        return Err(MetricsError::TooFewRuns(runs.len()));
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(MetricsError::BadConfidence(confidence));
    }
    let n = runs.len();
    let mean = runs.iter().sum::<f64>() / n as f64;
    let var = runs.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("valid dof");
    let t = dist.inverse_cdf((1.0 + confidence) / 2.0);
    let half_width = t * std / (n as f64).sqrt();
    Ok(BatchStats {
        mean,
        std,
        ci_lo: mean - half_width,
        ci_hi: mean + half_width,
        n,
        confidence,
    })
}

fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite"));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties; 0 when either
/// input has no variance.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "spearman needs paired samples");
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx).powi(2);
        vy += (b - my).powi(2);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::testutil::{snapshot_at, unit_caps};
    use crate::sampler::SaSampler;

    fn topo(bits: Vec<u8>) -> Topology {
        Topology::from_bits(bits).unwrap()
    }

    #[test]
    fn diversity_examples() {
        assert_eq!(
            diversity(&[topo(vec![1, 0, 1]), topo(vec![1, 0, 1])]).unwrap(),
            0.0
        );
        let d = diversity(&[topo(vec![1, 0, 0]), topo(vec![0, 1, 0])]).unwrap();
        assert!((d - 2.0 / 3.0).abs() < 1e-12);
        // Raw pairwise distances (1, 2, 3) at M = 4 average to 0.5.
        let a = topo(vec![0, 0, 0, 0]);
        let b = topo(vec![1, 0, 0, 0]);
        let c = topo(vec![0, 1, 1, 0]);
        let d = diversity(&[a, b, c]).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn diversity_errors_and_invariances() {
        assert!(matches!(
            diversity(&[topo(vec![1])]),
            Err(MetricsError::TooFewTopologies(1))
        ));
        assert!(diversity(&[topo(vec![1]), topo(vec![1, 0])]).is_err());

        let set = vec![
            topo(vec![1, 0, 1, 1]),
            topo(vec![0, 0, 1, 0]),
            topo(vec![1, 1, 0, 0]),
        ];
        let base = diversity(&set).unwrap();
        let mut reordered = set.clone();
        reordered.reverse();
        assert_eq!(diversity(&reordered).unwrap(), base);
        let complemented: Vec<Topology> = set
            .iter()
            .map(|t| topo(t.bits().iter().map(|b| 1 - b).collect()))
            .collect();
        assert_eq!(diversity(&complemented).unwrap(), base);
    }

    #[test]
    fn load_std_examples() {
        // Ring of 4 with unit capacities: all loads 2, std 0.
        let snap = snapshot_at(vec![
            [0.0, 0.0, 0.0],
            [100.0, 0.0, 0.0],
            [100.0, 100.0, 0.0],
            [0.0, 100.0, 0.0],
        ]);
        let index = build_link_index(&snap).unwrap();
        let caps = unit_caps(index.num_links());
        let mut ring = Topology::zeros(index.num_links());
        for (a, b) in [(0, 1), (1, 2), (2, 3), (0, 3)] {
            ring.set(index.edge_id(a, b).unwrap(), true);
        }
        assert!(load_std(&ring, &caps, &index) < 1e-12);

        // Star: loads (3, 1, 1, 1) -> population std sqrt(3)/2.
        let mut star = Topology::zeros(index.num_links());
        for peer in 1..4 {
            star.set(index.edge_id(0, peer).unwrap(), true);
        }
        assert!((load_std(&star, &caps, &index) - 0.75f64.sqrt()).abs() < 1e-12);

        let empty = Topology::zeros(index.num_links());
        assert_eq!(load_std(&empty, &caps, &index), 0.0);
    }

    /// Oracle: betweenness by explicit enumeration of all shortest paths.
    fn brute_betweenness(topology: &Topology, index: &LinkIndex, n: usize) -> Vec<f64> {
        let mut adjacency = vec![Vec::new(); n];
        for e in topology.active_links() {
            let (i, j) = index.pair(e);
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        // All shortest paths between s and t by BFS path enumeration.
        let mut score = vec![0.0; n];
        for s in 0..n {
            for t in (s + 1)..n {
                // BFS distances from s.
                let mut dist = vec![usize::MAX; n];
                dist[s] = 0;
                let mut queue = std::collections::VecDeque::from([s]);
                while let Some(v) = queue.pop_front() {
                    for &w in &adjacency[v] {
                        if dist[w] == usize::MAX {
                            dist[w] = dist[v] + 1;
                            queue.push_back(w);
                        }
                    }
                }
                if dist[t] == usize::MAX {
                    continue;
                }
                // Enumerate all shortest s-t paths by DFS along descending
                // distance from t.
                let mut paths: Vec<Vec<usize>> = Vec::new();
                let mut stack = vec![vec![t]];
                while let Some(path) = stack.pop() {
                    let head = *path.last().unwrap();
                    if head == s {
                        paths.push(path);
                        continue;
                    }
                    for &w in &adjacency[head] {
                        if dist[w] + 1 == dist[head] {
                            let mut next = path.clone();
                            next.push(w);
                            stack.push(next);
                        }
                    }
                }
                let total = paths.len() as f64;
                for path in paths {
                    for &v in &path[1..path.len() - 1] {
                        score[v] += 1.0 / total;
                    }
                }
            }
        }
        let norm = (n - 1) as f64 * (n - 2) as f64 / 2.0;
        score.iter().map(|v| v / norm).collect()
    }

    #[test]
    fn betweenness_star_and_complete() {
        let snap = snapshot_at(vec![
            [0.0, 0.0, 0.0],
            [100.0, 0.0, 0.0],
            [0.0, 100.0, 0.0],
            [0.0, 0.0, 100.0],
        ]);
        let index = build_link_index(&snap).unwrap();
        let mut star = Topology::zeros(index.num_links());
        for peer in 1..4 {
            star.set(index.edge_id(0, peer).unwrap(), true);
        }
        let report = betweenness(&star, &index, 4);
        assert!((report.per_node[0] - 1.0).abs() < 1e-12);
        assert!(report.connected);
        assert_eq!(report.max, report.per_node[0]);

        let complete = Topology::ones(index.num_links());
        let report = betweenness(&complete, &index, 4);
        assert!(report.per_node.iter().all(|&c| c.abs() < 1e-12));
    }

    #[test]
    fn betweenness_path_graph_matches_oracle() {
        // Path 0-1-2-3-4: middle node carries 4 of the 6 pairs.
        let positions: Vec<[f64; 3]> = (0..5).map(|i| [i as f64 * 100.0, 0.0, 0.0]).collect();
        let snap = snapshot_at(positions);
        let index = build_link_index(&snap).unwrap();
        let mut path = Topology::zeros(index.num_links());
        for i in 0..4 {
            path.set(index.edge_id(i, i + 1).unwrap(), true);
        }
        let report = betweenness(&path, &index, 5);
        let oracle = brute_betweenness(&path, &index, 5);
        for (got, want) in report.per_node.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-12, "got {got}, oracle {want}");
        }
        assert!((report.per_node[2] - 4.0 / 6.0).abs() < 1e-12);
        assert!(report.max <= 1.0 && report.max >= 0.0);
    }

    #[test]
    fn betweenness_random_graph_matches_oracle() {
        let positions: Vec<[f64; 3]> = vec![
            [0.0, 0.0, 0.0],
            [90.0, 10.0, 0.0],
            [20.0, 80.0, 0.0],
            [70.0, 60.0, 20.0],
            [40.0, 30.0, 50.0],
            [10.0, 60.0, 40.0],
        ];
        let snap = snapshot_at(positions);
        let index = build_link_index(&snap).unwrap();
        // Arbitrary fixed subset of links.
        let mut topology = Topology::zeros(index.num_links());
        for e in [0, 2, 3, 7, 9, 11, 13] {
            if e < index.num_links() {
                topology.set(e, true);
            }
        }
        let report = betweenness(&topology, &index, 6);
        let oracle = brute_betweenness(&topology, &index, 6);
        for (got, want) in report.per_node.iter().zip(&oracle) {
            assert!((got - want).abs() < 1e-9, "got {got}, oracle {want}");
        }
    }

    #[test]
    fn betweenness_flags_disconnection() {
        let snap = snapshot_at(vec![
            [0.0, 0.0, 0.0],
            [100.0, 0.0, 0.0],
            [0.0, 100.0, 0.0],
            [100.0, 100.0, 0.0],
        ]);
        let index = build_link_index(&snap).unwrap();
        let mut two_pairs = Topology::zeros(index.num_links());
        two_pairs.set(index.edge_id(0, 1).unwrap(), true);
        two_pairs.set(index.edge_id(2, 3).unwrap(), true);
        let report = betweenness(&two_pairs, &index, 4);
        assert!(!report.connected);
        assert!(report.max >= 0.0 && report.max <= 1.0);
    }

    #[test]
    fn scenario_families_hit_their_targets() {
        for label in FamilyLabel::ALL {
            let family = ScenarioFamily::new(label);
            let snapshot = gen_scenario(&family, 10, 7).expect("generation succeeds");
            let index = build_link_index(&snapshot).unwrap();
            let (measured, connected) =
                max_betweenness(&Topology::ones(index.num_links()), &index, 10);
            assert!(connected, "{label}: disconnected");
            assert!(
                (measured - label.target_betweenness()).abs() <= GEN_TOLERANCE,
                "{label}: measured {measured}, target {}",
                label.target_betweenness()
            );
        }
    }

    #[test]
    fn scenario_generation_is_deterministic() {
        let family = ScenarioFamily::new(FamilyLabel::I2);
        let a = gen_scenario(&family, 10, 99).unwrap();
        let b = gen_scenario(&family, 10, 99).unwrap();
        assert_eq!(a, b);
        let c = gen_scenario(&family, 10, 100).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn pure_hub_family_is_a_star() {
        let family = ScenarioFamily::new(FamilyLabel::I4);
        let snapshot = gen_scenario(&family, 10, 3).unwrap();
        let index = build_link_index(&snapshot).unwrap();
        let (measured, _) = max_betweenness(&Topology::ones(index.num_links()), &index, 10);
        assert!(measured >= 0.85, "I4 measured {measured}");
    }

    #[test]
    fn uniform_family_spreads_nodes() {
        let family = ScenarioFamily::new(FamilyLabel::I0);
        let snapshot = gen_scenario(&family, 10, 5).unwrap();
        let mut max_dist = 0.0f64;
        for i in 0..10 {
            for j in (i + 1)..10 {
                max_dist = max_dist.max(snapshot.distance(i, j));
            }
        }
        assert!(max_dist > GEN_RANGE_M, "placement collapsed near the hub");
    }

    #[test]
    fn beta_sweep_trend_sanity() {
        let family = ScenarioFamily::new(FamilyLabel::I2);
        let snapshot = gen_scenario(&family, 8, 11).unwrap();
        let cfg = SamplerConfig::new(1, 0);
        let rows = beta_sweep(
            &snapshot,
            &[0.0, 0.1],
            &SaSampler,
            &cfg,
            &[1, 2, 3],
            1.0,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows[1].mean_load_std <= rows[0].mean_load_std + 1e-9);
        assert!(rows[1].mean_throughput <= rows[0].mean_throughput + 1e-9);
        assert!(
            beta_sweep(&snapshot, &[0.1, 0.0], &SaSampler, &cfg, &[1], 1.0).is_err(),
            "unsorted betas must be rejected"
        );
    }

    #[test]
    fn summarize_examples() {
        let stats = summarize(&[4.2; 6], 0.95).unwrap();
        assert_eq!(stats.mean, 4.2);
        assert_eq!(stats.std, 0.0);
        assert_eq!(stats.ci_lo, stats.ci_hi);

        // Two points (0, 2): half-width = t(0.975, dof 1) = 12.7062...
        let stats = summarize(&[0.0, 2.0], 0.95).unwrap();
        assert!((stats.mean - 1.0).abs() < 1e-12);
        assert!((stats.std - 2f64.sqrt()).abs() < 1e-12);
        assert!((stats.ci_lo - (-11.7062047361747)).abs() < 1e-6);
        assert!((stats.ci_hi - 13.7062047361747).abs() < 1e-6);

        assert!(matches!(
            summarize(&[1.0], 0.95),
            Err(MetricsError::TooFewRuns(1))
        ));
        assert!(summarize(&[1.0, 2.0], 1.5).is_err());
    }

    #[test]
    fn spearman_basics() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&xs, &[10.0, 20.0, 25.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&xs, &[9.0, 7.0, 5.0, 3.0]) - (-1.0)).abs() < 1e-12);
        assert_eq!(spearman(&xs, &[5.0; 4]), 0.0);
        // Monotone with ties stays non-negative.
        let with_ties = spearman(&xs, &[1.0, 1.0, 2.0, 2.0]);
        assert!(with_ties > 0.0 && with_ties < 1.0 + 1e-12);
    }
}
