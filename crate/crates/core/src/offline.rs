//! Offline candidate-set generation: the multi-round sampling loop with
//! frequency-based diversity penalties, and the greedy max-diversity
//! portfolio reduction handed to the online stage.
//!
//! Each round samples `k` topologies against the current (penalized) matrix,
//! scores them against the un-penalized base matrix, then raises the
//! diagonal of every link proportionally to its activation frequency in the
//! round, steering later rounds toward unexplored structures.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::Topology;
use crate::qubo::{QuboError, QuboMatrix};
use crate::sampler::{Sampler, SamplerConfig, SamplerError};

#[derive(Debug, Error)]
pub enum OfflineError {
    #[error("invalid diversity config: {0}")]
    InvalidConfig(String),
    #[error("the initial matrix must be penalty-free")]
    PenaltyNotClean,
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("candidate set parse error: {0}")]
    Malformed(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Qubo(#[from] QuboError),
}

/// Parameters of the offline loop. `lambda = None` resolves to half the mean
/// absolute diagonal of the base matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiversityConfig {
    pub rounds: usize,
    pub samples_per_round: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub dedupe: bool,
}

impl Default for DiversityConfig {
    fn default() -> Self {
        Self {
            rounds: 5,
            samples_per_round: 10,
            lambda: None,
            dedupe: true,
        }
    }
}

impl DiversityConfig {
    pub fn validate(&self) -> Result<(), OfflineError> {
        if self.rounds < 1 || self.samples_per_round < 1 {
            return Err(OfflineError::InvalidConfig(
                "rounds and samples_per_round must be >= 1".into(),
            ));
        }
        if let Some(lambda) = self.lambda {
            if !(lambda >= 0.0) {
                return Err(OfflineError::InvalidConfig(format!(
                    "lambda must be non-negative, got {lambda}"
                )));
            }
        }
        Ok(())
    }
}

/// Default penalty weight: comparable to the linear terms so the penalty
/// meaningfully redirects search without destroying feasible optima.
pub fn default_lambda(q0: &QuboMatrix) -> f64 {
    0.5 * q0.mean_abs_diagonal()
}

/// One generated candidate with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateEntry {
    pub topology: Topology,
    /// Objective under the un-penalized base matrix.
    pub base_objective: f64,
    /// Round that produced the sample (0-based).
    pub round: usize,
    /// Position within its round's batch.
    pub sample_index: usize,
}

/// The offline output: candidate topologies scored against the base matrix,
/// tied to the snapshot they were generated for.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateSet {
    pub snapshot_id: String,
    pub entries: Vec<CandidateEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateFileEntry {
    bits: Vec<u8>,
    objective: f64,
    round: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CandidateFile {
    snapshot_id: String,
    candidates: Vec<CandidateFileEntry>,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn topologies(&self) -> Vec<Topology> {
        self.entries.iter().map(|e| e.topology.clone()).collect()
    }

    /// Number of links each candidate spans; zero for an empty set.
    pub fn dim(&self) -> usize {
        self.entries.first().map_or(0, |e| e.topology.len())
    }

    pub fn to_json_pretty(&self) -> String {
        let file = CandidateFile {
            snapshot_id: self.snapshot_id.clone(),
            candidates: self
                .entries
                .iter()
                .map(|e| CandidateFileEntry {
                    bits: e.topology.bits().to_vec(),
                    objective: e.base_objective,
                    round: e.round,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("candidate set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, OfflineError> {
        let file: CandidateFile =
            serde_json::from_str(text).map_err(|e| OfflineError::Malformed(e.to_string()))?;
        let mut entries = Vec::with_capacity(file.candidates.len());
        let mut per_round_counts: Vec<usize> = Vec::new();
        for item in file.candidates {
            let topology = Topology::from_bits(item.bits)
                .map_err(|e| OfflineError::Malformed(e.to_string()))?;
            if per_round_counts.len() <= item.round {
                per_round_counts.resize(item.round + 1, 0);
            }
            let sample_index = per_round_counts[item.round];
            per_round_counts[item.round] += 1;
            entries.push(CandidateEntry {
                topology,
                base_objective: item.objective,
                round: item.round,
                sample_index,
            });
        }
        Ok(Self {
            snapshot_id: file.snapshot_id,
            entries,
        })
    }
}

/// Runs the multi-round generation loop. Round `r` samples against the
/// current matrix with seed `scfg.seed + r`, appends the batch scored
/// against the base matrix, and applies the frequency penalty before the
/// next round. Any sampler failure aborts the whole run.
pub fn generate_candidates(
    q0: &QuboMatrix,
    sampler: &dyn Sampler,
    dcfg: &DiversityConfig,
    scfg: &SamplerConfig,
    snapshot_id: &str,
) -> Result<CandidateSet, OfflineError> {
    dcfg.validate()?;
    if !q0.is_penalty_free() {
        return Err(OfflineError::PenaltyNotClean);
    }
    let lambda = dcfg.lambda.unwrap_or_else(|| default_lambda(q0));
    let mut working = q0.clone();
    let mut entries = Vec::with_capacity(dcfg.rounds * dcfg.samples_per_round);
    for round in 0..dcfg.rounds {
        let mut round_cfg = scfg.with_seed(scfg.seed.wrapping_add(round as u64));
        round_cfg.num_samples = dcfg.samples_per_round;
        let batch = sampler.sample(&working, &round_cfg)?;
        for (sample_index, topology) in batch.topologies.iter().enumerate() {
            let base_objective = working.base_objective(topology)?;
            entries.push(CandidateEntry {
                topology: topology.clone(),
                base_objective,
                round,
                sample_index,
            });
        }
        working.apply_frequency_penalty(&batch.topologies, lambda)?;
    }
    if dcfg.dedupe {
        let mut seen: HashSet<Vec<u8>> = HashSet::new();
        entries.retain(|e| seen.insert(e.topology.bits().to_vec()));
    }
    Ok(CandidateSet {
        snapshot_id: snapshot_id.to_string(),
        entries,
    })
}

/// Greedy max-diversity reduction: start from the best base objective, then
/// repeatedly add the candidate maximizing its minimum normalized Hamming
/// distance to the chosen set (ties to the better objective, then to the
/// earlier entry). Returns exactly `min(size, #distinct)` entries.
pub fn select_portfolio(cset: &CandidateSet, size: usize) -> Result<CandidateSet, OfflineError> {
    if cset.entries.is_empty() {
        return Err(OfflineError::EmptyCandidates);
    }
    if size < 1 {
        return Err(OfflineError::InvalidConfig("portfolio size must be >= 1".into()));
    }
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let distinct: Vec<&CandidateEntry> = cset
        .entries
        .iter()
        .filter(|e| seen.insert(e.topology.bits().to_vec()))
        .collect();
    let links = distinct[0].topology.len().max(1) as f64;

    let start = distinct
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            a.base_objective
                .partial_cmp(&b.base_objective)
                .expect("finite objectives")
        })
        .map(|(i, _)| i)
        .expect("non-empty distinct set");

    let target = size.min(distinct.len());
    let mut chosen_idx = vec![start];
    let mut remaining: Vec<usize> = (0..distinct.len()).filter(|&i| i != start).collect();
    while chosen_idx.len() < target {
        let mut best: Option<(usize, f64, f64)> = None; // (remaining pos, min dist, objective)
        for (pos, &cand) in remaining.iter().enumerate() {
            let min_dist = chosen_idx
                .iter()
                .map(|&c| {
                    distinct[cand].topology.hamming_distance(&distinct[c].topology) as f64 / links
                })
                .fold(f64::INFINITY, f64::min);
            let obj = distinct[cand].base_objective;
            let better = match &best {
                None => true,
                Some((_, d, o)) => min_dist > *d || (min_dist == *d && obj < *o),
            };
            if better {
                best = Some((pos, min_dist, obj));
            }
        }
        let (pos, _, _) = best.expect("remaining non-empty");
        chosen_idx.push(remaining.remove(pos));
    }

    Ok(CandidateSet {
        snapshot_id: cset.snapshot_id.clone(),
        entries: chosen_idx
            .into_iter()
            .map(|i| distinct[i].clone())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::testutil::{snapshot_at, unit_caps};
    use crate::net::{build_link_index, compute_capacities};
    use crate::qubo::{build_qubo, ObjectiveParams};
    use crate::sampler::{sa_sample, SaSampler, SampleBatch};

    fn ten_node_qubo() -> QuboMatrix {
        let nodes: Vec<[f64; 3]> = (0..10)
            .map(|i| {
                let angle = i as f64 * std::f64::consts::TAU / 10.0;
                [120.0 * angle.cos(), 120.0 * angle.sin(), 100.0]
            })
            .collect();
        let snap = snapshot_at(nodes);
        let index = build_link_index(&snap).unwrap();
        let caps = compute_capacities(&snap, &index).unwrap();
        build_qubo(&snap, &index, &caps, &ObjectiveParams::default()).unwrap()
    }

    #[test]
    fn single_round_without_penalty_matches_plain_sampling() {
        let q = ten_node_qubo();
        let scfg = SamplerConfig::new(4, 77);
        let dcfg = DiversityConfig {
            rounds: 1,
            samples_per_round: 4,
            lambda: Some(0.0),
            dedupe: false,
        };
        let set = generate_candidates(&q, &SaSampler, &dcfg, &scfg, "snap").unwrap();
        let direct = sa_sample(&q, &scfg).unwrap();
        assert_eq!(set.len(), 4);
        for (entry, (topo, energy)) in set
            .entries
            .iter()
            .zip(direct.topologies.iter().zip(&direct.energies))
        {
            assert_eq!(&entry.topology, topo);
            assert!((entry.base_objective - energy).abs() < 1e-9);
        }
    }

    #[test]
    fn strong_penalty_redirects_the_second_round() {
        // Two coupled links with near-degenerate single-link optima:
        // (1,0) -> -1.0, (0,1) -> -0.99, (1,1) -> +0.01.
        let q = QuboMatrix::from_entries(
            2,
            &[(0, 0, -1.0), (1, 1, -0.99), (0, 1, 1.0)],
        )
        .unwrap();
        let dcfg = DiversityConfig {
            rounds: 2,
            samples_per_round: 2,
            lambda: Some(5.0),
            dedupe: false,
        };
        let set =
            generate_candidates(&q, &SaSampler, &dcfg, &SamplerConfig::new(2, 3), "snap").unwrap();
        let round0: Vec<_> = set.entries.iter().filter(|e| e.round == 0).collect();
        let round1: Vec<_> = set.entries.iter().filter(|e| e.round == 1).collect();
        for entry in &round0 {
            assert_eq!(entry.topology.bits(), &[1, 0]);
        }
        // After the penalty, link 0 costs -1.0 + 5.0; the alternative wins.
        for entry in &round1 {
            assert_eq!(entry.topology.bits(), &[0, 1]);
        }
        // Scores reported against the base matrix, not the penalized one.
        assert!((round1[0].base_objective - (-0.99)).abs() < 1e-12);
    }

    #[test]
    fn candidate_count_before_dedupe() {
        let q = ten_node_qubo();
        let dcfg = DiversityConfig {
            rounds: 3,
            samples_per_round: 10,
            lambda: None,
            dedupe: false,
        };
        let set =
            generate_candidates(&q, &SaSampler, &dcfg, &SamplerConfig::new(10, 5), "snap")
                .unwrap();
        assert_eq!(set.len(), 30);
    }

    #[test]
    fn dedupe_removes_duplicates_and_keeps_first() {
        let q = ten_node_qubo();
        let dcfg = DiversityConfig {
            rounds: 3,
            samples_per_round: 10,
            lambda: Some(0.0), // no penalty: rounds repeat themselves
            dedupe: true,
        };
        let set =
            generate_candidates(&q, &SaSampler, &dcfg, &SamplerConfig::new(10, 5), "snap")
                .unwrap();
        let mut seen = HashSet::new();
        for entry in &set.entries {
            assert!(seen.insert(entry.topology.bits().to_vec()), "duplicate survived");
        }
    }

    #[test]
    fn penalized_matrix_replay_reproduces_the_run() {
        // Re-deriving every round from the recorded provenance must
        // reproduce the exact matrices and samples of the original run.
        let q0 = ten_node_qubo();
        let scfg = SamplerConfig::new(10, 41);
        let dcfg = DiversityConfig {
            rounds: 3,
            samples_per_round: 6,
            lambda: None,
            dedupe: false,
        };
        let set = generate_candidates(&q0, &SaSampler, &dcfg, &scfg, "snap").unwrap();

        let lambda = default_lambda(&q0);
        let mut replay = q0.clone();
        for round in 0..dcfg.rounds {
            let mut cfg = scfg.with_seed(scfg.seed + round as u64);
            cfg.num_samples = dcfg.samples_per_round;
            let batch = sa_sample(&replay, &cfg).unwrap();
            let recorded: Vec<_> = set
                .entries
                .iter()
                .filter(|e| e.round == round)
                .map(|e| e.topology.clone())
                .collect();
            assert_eq!(batch.topologies, recorded, "round {round} diverged");
            replay.apply_frequency_penalty(&batch.topologies, lambda).unwrap();
        }
        // Penalty per diagonal equals lambda times the summed per-round
        // frequencies of the recorded samples.
        for e in 0..q0.dim() {
            let mut expected = 0.0;
            for round in 0..dcfg.rounds {
                let round_entries: Vec<_> =
                    set.entries.iter().filter(|x| x.round == round).collect();
                let active = round_entries
                    .iter()
                    .filter(|x| x.topology.is_active(e))
                    .count() as f64;
                expected += lambda * active / round_entries.len() as f64;
            }
            assert!((replay.penalty_accum()[e] - expected).abs() < 1e-12);
        }
    }

    struct FailingSampler {
        fail_at_call: std::cell::Cell<usize>,
    }

    impl Sampler for FailingSampler {
        fn sample(
            &self,
            q: &QuboMatrix,
            cfg: &SamplerConfig,
        ) -> Result<SampleBatch, SamplerError> {
            let remaining = self.fail_at_call.get();
            if remaining == 0 {
                return Err(SamplerError::Transport("link down".into()));
            }
            self.fail_at_call.set(remaining - 1);
            sa_sample(q, cfg)
        }

        fn name(&self) -> &'static str {
            "failing"
        }
    }

    #[test]
    fn sampler_failure_aborts_without_partial_output() {
        let q = ten_node_qubo();
        let sampler = FailingSampler {
            fail_at_call: std::cell::Cell::new(1),
        };
        let dcfg = DiversityConfig {
            rounds: 3,
            samples_per_round: 2,
            lambda: None,
            dedupe: false,
        };
        let result =
            generate_candidates(&q, &sampler, &dcfg, &SamplerConfig::new(2, 1), "snap");
        assert!(matches!(result, Err(OfflineError::Sampler(_))));
    }

    #[test]
    fn rejects_penalized_initial_matrix() {
        let mut q = ten_node_qubo();
        q.apply_frequency_penalty(&[Topology::ones(q.dim())], 1.0).unwrap();
        let result = generate_candidates(
            &q,
            &SaSampler,
            &DiversityConfig::default(),
            &SamplerConfig::new(2, 1),
            "snap",
        );
        assert!(matches!(result, Err(OfflineError::PenaltyNotClean)));
    }

    fn entry(bits: Vec<u8>, objective: f64) -> CandidateEntry {
        CandidateEntry {
            topology: Topology::from_bits(bits).unwrap(),
            base_objective: objective,
            round: 0,
            sample_index: 0,
        }
    }

    #[test]
    fn portfolio_returns_all_distinct_when_size_is_large() {
        let cset = CandidateSet {
            snapshot_id: "s".into(),
            entries: vec![
                entry(vec![1, 0, 0], -1.0),
                entry(vec![0, 1, 0], -0.5),
                entry(vec![1, 0, 0], -1.0),
            ],
        };
        let portfolio = select_portfolio(&cset, 10).unwrap();
        assert_eq!(portfolio.len(), 2);
    }

    #[test]
    fn portfolio_never_picks_duplicates() {
        let cset = CandidateSet {
            snapshot_id: "s".into(),
            entries: vec![
                entry(vec![1, 1, 0], -2.0),
                entry(vec![1, 1, 0], -2.0),
                entry(vec![0, 0, 1], -1.0),
            ],
        };
        let portfolio = select_portfolio(&cset, 2).unwrap();
        let bits: Vec<_> = portfolio.entries.iter().map(|e| e.topology.bits().to_vec()).collect();
        assert_eq!(bits, vec![vec![1, 1, 0], vec![0, 0, 1]]);
    }

    #[test]
    fn portfolio_greedy_hand_trace() {
        // M = 10; pairwise normalized distances: (a,b) = 0.1, (a,c) = 0.5,
        // (b,c) = 0.6. Best objective is a; its farthest peer is c.
        let a = vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let mut b = a.clone();
        b[0] = 0; // dist(a, b) = 1
        let mut c = a.clone();
        for e in 1..6 {
            c[e] ^= 1; // dist(a, c) = 5, dist(b, c) = 6
        }
        let cset = CandidateSet {
            snapshot_id: "s".into(),
            entries: vec![
                entry(a.clone(), -3.0),
                entry(b, -2.9),
                entry(c.clone(), -2.8),
            ],
        };
        let portfolio = select_portfolio(&cset, 2).unwrap();
        let bits: Vec<_> = portfolio.entries.iter().map(|e| e.topology.bits().to_vec()).collect();
        assert_eq!(bits, vec![a, c]);
    }

    #[test]
    fn portfolio_rejects_empty_input() {
        let cset = CandidateSet {
            snapshot_id: "s".into(),
            entries: vec![],
        };
        assert!(matches!(
            select_portfolio(&cset, 3),
            Err(OfflineError::EmptyCandidates)
        ));
    }

    #[test]
    fn candidate_set_json_round_trip() {
        let q = ten_node_qubo();
        let dcfg = DiversityConfig {
            rounds: 2,
            samples_per_round: 3,
            lambda: None,
            dedupe: false,
        };
        let set =
            generate_candidates(&q, &SaSampler, &dcfg, &SamplerConfig::new(3, 9), "snap-id")
                .unwrap();
        let text = set.to_json_pretty();
        let back = CandidateSet::from_json(&text).unwrap();
        assert_eq!(back.snapshot_id, "snap-id");
        assert_eq!(back.entries.len(), set.entries.len());
        for (orig, loaded) in set.entries.iter().zip(&back.entries) {
            assert_eq!(orig.topology, loaded.topology);
            assert_eq!(orig.round, loaded.round);
            assert_eq!(orig.sample_index, loaded.sample_index);
            assert!((orig.base_objective - loaded.base_objective).abs() < 1e-12);
        }
    }
}
