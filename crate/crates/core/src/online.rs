//! Online topology selection: periodic utility scoring of the candidate
//! portfolio against live link and energy state, argmax selection, and
//! switching guarded by a hysteresis margin and a minimum dwell time.

use thiserror::Error;

use crate::net::{LinkIndex, Topology};
use crate::offline::CandidateSet;

#[derive(Debug, Error)]
pub enum OnlineError {
    #[error("candidate set is empty")]
    EmptyCandidates,
    #[error("current index {current} out of range for {candidates} candidates")]
    InvalidCurrent { current: usize, candidates: usize },
    #[error("{context}: expected length {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid utility weights: {0}")]
    InvalidWeights(String),
}

/// Online trade-off between instantaneous performance and endurance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UtilityWeights {
    pub w_perf: f64,
    pub w_life: f64,
}

impl Default for UtilityWeights {
    fn default() -> Self {
        Self {
            w_perf: 1.0,
            w_life: 0.01,
        }
    }
}

impl UtilityWeights {
    pub fn validate(&self) -> Result<(), OnlineError> {
        if !(self.w_perf >= 0.0) || !(self.w_life >= 0.0) {
            return Err(OnlineError::InvalidWeights(format!(
                "weights must be non-negative (w_perf={}, w_life={})",
                self.w_perf, self.w_life
            )));
        }
        if self.w_perf == 0.0 && self.w_life == 0.0 {
            return Err(OnlineError::InvalidWeights(
                "w_perf and w_life cannot both be zero".into(),
            ));
        }
        Ok(())
    }
}

/// Real-time metrics collected at one instant: per-link SINR, per-node
/// residual energy, and the links currently in outage.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkStateSample {
    pub time_s: f64,
    pub sinr_linear: Vec<f64>,
    pub energy_j: Vec<f64>,
    pub outage_mask: Vec<bool>,
}

/// Switching guards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwitchPolicy {
    /// Minimum relative utility margin before switching.
    pub hysteresis_margin: f64,
    /// Minimum time between switches, seconds.
    pub min_dwell_s: f64,
    /// Steps of forced zero throughput after a switch.
    pub switch_outage_steps: usize,
}

impl Default for SwitchPolicy {
    fn default() -> Self {
        Self {
            hysteresis_margin: 0.05,
            min_dwell_s: 3.0,
            switch_outage_steps: 1,
        }
    }
}

fn check_state(state: &LinkStateSample, index: &LinkIndex) -> Result<(), OnlineError> {
    if state.sinr_linear.len() != index.num_links() {
        return Err(OnlineError::DimensionMismatch {
            context: "sinr vector",
            expected: index.num_links(),
            actual: state.sinr_linear.len(),
        });
    }
    if state.outage_mask.len() != index.num_links() {
        return Err(OnlineError::DimensionMismatch {
            context: "outage mask",
            expected: index.num_links(),
            actual: state.outage_mask.len(),
        });
    }
    if state.energy_j.len() != index.num_nodes() {
        return Err(OnlineError::DimensionMismatch {
            context: "energy vector",
            expected: index.num_nodes(),
            actual: state.energy_j.len(),
        });
    }
    Ok(())
}

/// Utility of one candidate: `w_perf` times the summed log2(1 + SINR) of its
/// active links (outage links contribute zero), plus `w_life` times the
/// minimum residual energy over nodes incident to an active link. A
/// candidate with no active links falls back to the minimum energy over all
/// nodes for the endurance term.
pub fn utility_score(
    candidate: &Topology,
    state: &LinkStateSample,
    index: &LinkIndex,
    weights: &UtilityWeights,
) -> Result<f64, OnlineError> {
    weights.validate()?;
    check_state(state, index)?;
    if candidate.len() != index.num_links() {
        return Err(OnlineError::DimensionMismatch {
            context: "candidate topology",
            expected: index.num_links(),
            actual: candidate.len(),
        });
    }
    let mut perf = 0.0;
    let mut min_energy = f64::INFINITY;
    let mut any_active = false;
    for e in candidate.active_links() {
        any_active = true;
        if !state.outage_mask[e] {
            perf += (1.0 + state.sinr_linear[e]).log2();
        }
        let (i, j) = index.pair(e);
        min_energy = min_energy.min(state.energy_j[i]).min(state.energy_j[j]);
    }
    if !any_active {
        min_energy = state.energy_j.iter().copied().fold(f64::INFINITY, f64::min);
    }
    Ok(weights.w_perf * perf + weights.w_life * min_energy)
}

/// Outcome of one selection cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Selection {
    pub selected: usize,
    pub switched: bool,
}

/// Scores every candidate, takes the argmax (ties to the lowest index), and
/// switches away from `current` only if the dwell time has elapsed and the
/// best score clears the hysteresis margin over the current one.
pub fn select_topology(
    cset: &CandidateSet,
    state: &LinkStateSample,
    index: &LinkIndex,
    weights: &UtilityWeights,
    current: usize,
    time_since_switch_s: f64,
    policy: &SwitchPolicy,
) -> Result<Selection, OnlineError> {
    if cset.is_empty() {
        return Err(OnlineError::EmptyCandidates);
    }
    if current >= cset.len() {
        return Err(OnlineError::InvalidCurrent {
            current,
            candidates: cset.len(),
        });
    }
    let mut scores = Vec::with_capacity(cset.len());
    for entry in &cset.entries {
        scores.push(utility_score(&entry.topology, state, index, weights)?);
    }
    let mut best = 0;
    for i in 1..scores.len() {
        if scores[i] > scores[best] {
            best = i;
        }
    }
    if best == current {
        return Ok(Selection {
            selected: current,
            switched: false,
        });
    }
    let current_score = scores[current];
    let clears_margin = if current_score > 0.0 {
        scores[best] >= (1.0 + policy.hysteresis_margin) * current_score
    } else {
        scores[best] > current_score
    };
    if time_since_switch_s >= policy.min_dwell_s && clears_margin {
        Ok(Selection {
            selected: best,
            switched: true,
        })
    } else {
        Ok(Selection {
            selected: current,
            switched: false,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::testutil::snapshot_at;
    use crate::net::build_link_index;
    use crate::offline::{CandidateEntry, CandidateSet};

    /// Star on 4 nodes: link index over the complete graph, M = 6.
    fn four_node_index() -> LinkIndex {
        let snap = snapshot_at(vec![
            [0.0, 0.0, 0.0],
            [100.0, 0.0, 0.0],
            [0.0, 100.0, 0.0],
            [0.0, 0.0, 100.0],
        ]);
        build_link_index(&snap).unwrap()
    }

    fn state(sinr: Vec<f64>, energy: Vec<f64>, outage: Vec<bool>) -> LinkStateSample {
        LinkStateSample {
            time_s: 0.0,
            sinr_linear: sinr,
            energy_j: energy,
            outage_mask: outage,
        }
    }

    fn cset_of(topologies: Vec<Vec<u8>>) -> CandidateSet {
        CandidateSet {
            snapshot_id: "s".into(),
            entries: topologies
                .into_iter()
                .enumerate()
                .map(|(i, bits)| CandidateEntry {
                    topology: Topology::from_bits(bits).unwrap(),
                    base_objective: -(i as f64),
                    round: 0,
                    sample_index: i,
                })
                .collect(),
        }
    }

    #[test]
    fn performance_term_arithmetic() {
        // Two nodes, one pair -> use a 2-node index with one link? The
        // example needs two links; use the 4-node index, links 0 and 1.
        let index = four_node_index();
        let mut sinr = vec![0.0; 6];
        sinr[0] = 1.0;
        sinr[1] = 3.0;
        let s = state(sinr, vec![100.0; 4], vec![false; 6]);
        let mut topo = Topology::zeros(6);
        topo.set(0, true);
        topo.set(1, true);
        let weights = UtilityWeights {
            w_perf: 1.0,
            w_life: 0.0,
        };
        let score = utility_score(&topo, &s, &index, &weights).unwrap();
        assert!((score - 3.0).abs() < 1e-12); // log2(2) + log2(4)
    }

    #[test]
    fn endurance_term_takes_min_incident_energy() {
        let index = four_node_index();
        // Links 0 = (0,1) and 1 = (0,2): incident nodes {0, 1, 2}.
        let energies = vec![50.0, 80.0, 120.0, 1.0];
        let s = state(vec![1.0; 6], energies, vec![false; 6]);
        let mut topo = Topology::zeros(6);
        topo.set(0, true);
        topo.set(1, true);
        let weights = UtilityWeights {
            w_perf: 0.0,
            w_life: 1.0,
        };
        let score = utility_score(&topo, &s, &index, &weights).unwrap();
        // Node 3 is isolated and does not gate the score.
        assert!((score - 50.0).abs() < 1e-12);
    }

    #[test]
    fn outage_links_contribute_nothing() {
        let index = four_node_index();
        let s = state(vec![7.0; 6], vec![10.0; 4], vec![true; 6]);
        let topo = Topology::ones(6);
        let weights = UtilityWeights {
            w_perf: 1.0,
            w_life: 0.0,
        };
        assert_eq!(utility_score(&topo, &s, &index, &weights).unwrap(), 0.0);
    }

    #[test]
    fn empty_candidate_uses_global_min_energy() {
        let index = four_node_index();
        let s = state(vec![1.0; 6], vec![9.0, 4.0, 6.0, 8.0], vec![false; 6]);
        let topo = Topology::zeros(6);
        let weights = UtilityWeights {
            w_perf: 1.0,
            w_life: 2.0,
        };
        let score = utility_score(&topo, &s, &index, &weights).unwrap();
        assert!((score - 8.0).abs() < 1e-12); // 2.0 * min over all nodes
    }

    #[test]
    fn disabled_policy_reduces_to_pure_argmax() {
        let index = four_node_index();
        let mut sinr = vec![0.0; 6];
        sinr[2] = 100.0;
        let s = state(sinr, vec![100.0; 4], vec![false; 6]);
        let cset = cset_of(vec![
            vec![1, 0, 0, 0, 0, 0],
            vec![0, 0, 1, 0, 0, 0], // strongest link
            vec![0, 1, 0, 0, 0, 0],
        ]);
        let policy = SwitchPolicy {
            hysteresis_margin: 0.0,
            min_dwell_s: 0.0,
            switch_outage_steps: 0,
        };
        let sel = select_topology(
            &cset,
            &s,
            &index,
            &UtilityWeights::default(),
            0,
            0.0,
            &policy,
        )
        .unwrap();
        assert_eq!(sel, Selection { selected: 1, switched: true });
    }

    #[test]
    fn hysteresis_blocks_marginal_improvements() {
        let index = four_node_index();
        // Candidate 0 scores 10, candidate 1 scores 10.4: with a 5% margin
        // the switch needs at least 10.5.
        let mut sinr = vec![0.0; 6];
        sinr[0] = 2f64.powf(10.0) - 1.0;
        sinr[1] = 2f64.powf(10.4) - 1.0;
        let s = state(sinr, vec![100.0; 4], vec![false; 6]);
        let cset = cset_of(vec![vec![1, 0, 0, 0, 0, 0], vec![0, 1, 0, 0, 0, 0]]);
        let weights = UtilityWeights {
            w_perf: 1.0,
            w_life: 0.0,
        };
        let policy = SwitchPolicy {
            hysteresis_margin: 0.05,
            min_dwell_s: 0.0,
            switch_outage_steps: 1,
        };
        let sel = select_topology(&cset, &s, &index, &weights, 0, 100.0, &policy).unwrap();
        assert_eq!(sel, Selection { selected: 0, switched: false });

        // Raising the alternative above the margin flips the decision.
        let mut sinr = vec![0.0; 6];
        sinr[0] = 2f64.powf(10.0) - 1.0;
        sinr[1] = 2f64.powf(10.6) - 1.0;
        let s = state(sinr, vec![100.0; 4], vec![false; 6]);
        let sel = select_topology(&cset, &s, &index, &weights, 0, 100.0, &policy).unwrap();
        assert_eq!(sel, Selection { selected: 1, switched: true });
    }

    #[test]
    fn dwell_gate_blocks_any_switch() {
        let index = four_node_index();
        let mut sinr = vec![0.0; 6];
        sinr[1] = 1000.0;
        let s = state(sinr, vec![100.0; 4], vec![false; 6]);
        let cset = cset_of(vec![vec![1, 0, 0, 0, 0, 0], vec![0, 1, 0, 0, 0, 0]]);
        let policy = SwitchPolicy {
            hysteresis_margin: 0.0,
            min_dwell_s: 3.0,
            switch_outage_steps: 1,
        };
        let sel = select_topology(
            &cset,
            &s,
            &index,
            &UtilityWeights::default(),
            0,
            2.0,
            &policy,
        )
        .unwrap();
        assert_eq!(sel, Selection { selected: 0, switched: false });
    }

    #[test]
    fn argmax_ties_break_to_lowest_index() {
        let index = four_node_index();
        let s = state(vec![1.0; 6], vec![100.0; 4], vec![false; 6]);
        // Two identical single-link candidates and a weaker one.
        let cset = cset_of(vec![
            vec![0, 1, 0, 0, 0, 0],
            vec![0, 1, 0, 0, 0, 0],
            vec![0, 0, 0, 0, 0, 0],
        ]);
        let policy = SwitchPolicy {
            hysteresis_margin: 0.0,
            min_dwell_s: 0.0,
            switch_outage_steps: 0,
        };
        let weights = UtilityWeights {
            w_perf: 1.0,
            w_life: 0.0,
        };
        let sel = select_topology(&cset, &s, &index, &weights, 2, 10.0, &policy).unwrap();
        assert_eq!(sel.selected, 0);
    }

    #[test]
    fn error_paths() {
        let index = four_node_index();
        let s = state(vec![1.0; 6], vec![100.0; 4], vec![false; 6]);
        let empty = CandidateSet {
            snapshot_id: "s".into(),
            entries: vec![],
        };
        assert!(matches!(
            select_topology(
                &empty,
                &s,
                &index,
                &UtilityWeights::default(),
                0,
                0.0,
                &SwitchPolicy::default()
            ),
            Err(OnlineError::EmptyCandidates)
        ));
        let cset = cset_of(vec![vec![1, 0, 0, 0, 0, 0]]);
        assert!(matches!(
            select_topology(
                &cset,
                &s,
                &index,
                &UtilityWeights::default(),
                5,
                0.0,
                &SwitchPolicy::default()
            ),
            Err(OnlineError::InvalidCurrent { .. })
        ));
        let bad_weights = UtilityWeights {
            w_perf: 0.0,
            w_life: 0.0,
        };
        let topo = Topology::ones(6);
        assert!(utility_score(&topo, &s, &index, &bad_weights).is_err());
    }
}
