//! QUBO construction and evaluation.
//!
//! The objective `-alpha * T(x) + beta * F(x)` (throughput minus fragility)
//! is expanded into a symmetric matrix `Q` under the convention
//!
//! ```text
//! objective(x) = sum_e q[e][e] x_e  +  2 * sum_{e<e'} q[e][e'] x_e x_e'
//! ```
//!
//! which is exactly `x^T Q x` for binary `x`. Diagonal entries are
//! `-alpha*C_e + 2*beta*C_e^2` (each link contributes its squared capacity to
//! both endpoint loads); an off-diagonal entry is `beta*C_e*C_e'` when the two
//! links share exactly one node, zero otherwise. Diversity penalties from the
//! offline loop accumulate on the diagonal only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{CapacityTable, LinkIndex, NetworkSnapshot, Topology};

#[derive(Debug, Error)]
pub enum QuboError {
    #[error("{context}: expected dimension {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("invalid objective params: {0}")]
    InvalidParams(String),
    #[error("penalty update needs a non-empty sample list")]
    EmptySamples,
    #[error("penalty weight must be non-negative, got {0}")]
    NegativeLambda(f64),
    #[error("malformed QUBO exchange payload: {0}")]
    MalformedExchange(String),
}

/// Trade-off weights of the offline objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveParams {
    /// Throughput weight (alpha >= 0).
    pub alpha: f64,
    /// Fragility weight (beta >= 0).
    pub beta: f64,
}

impl ObjectiveParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self, QuboError> {
        let p = Self { alpha, beta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), QuboError> {
        if !(self.alpha >= 0.0) || !(self.beta >= 0.0) {
            return Err(QuboError::InvalidParams(format!(
                "weights must be non-negative (alpha={}, beta={})",
                self.alpha, self.beta
            )));
        }
        if self.alpha == 0.0 && self.beta == 0.0 {
            return Err(QuboError::InvalidParams(
                "alpha and beta cannot both be zero".into(),
            ));
        }
        Ok(())
    }
}

impl Default for ObjectiveParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.01,
        }
    }
}

/// Symmetric QUBO matrix plus its un-penalized base and the accumulated
/// diagonal diversity penalties. `q == base + diag(penalty_accum)` holds at
/// all times.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboMatrix {
    dim: usize,
    q: Vec<f64>,
    base: Vec<f64>,
    penalty_accum: Vec<f64>,
}

impl QuboMatrix {
    /// Builds a matrix from explicit entries; used by tests and the exchange
    /// decoder. `entries` are `(e, e', coeff)` with `e <= e'`.
    pub fn from_entries(
        dim: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self, QuboError> {
        let mut q = vec![0.0; dim * dim];
        for &(a, b, coeff) in entries {
            if a > b || b >= dim {
                return Err(QuboError::MalformedExchange(format!(
                    "entry ({a}, {b}) out of bounds for dim {dim}"
                )));
            }
            q[a * dim + b] = coeff;
            q[b * dim + a] = coeff;
        }
        Ok(Self {
            dim,
            base: q.clone(),
            q,
            penalty_accum: vec![0.0; dim],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.dim + j]
    }

    pub fn base_entry(&self, i: usize, j: usize) -> f64 {
        self.base[i * self.dim + j]
    }

    pub fn penalty_accum(&self) -> &[f64] {
        &self.penalty_accum
    }

    pub fn is_penalty_free(&self) -> bool {
        self.penalty_accum.iter().all(|&p| p == 0.0)
    }

    /// Largest absolute entry of the current matrix; the SA schedule default.
    pub fn max_abs_entry(&self) -> f64 {
        self.q.iter().fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Mean absolute diagonal of the base matrix; the penalty weight default.
    pub fn mean_abs_diagonal(&self) -> f64 {
        if self.dim == 0 {
            return 0.0;
        }
        (0..self.dim)
            .map(|e| self.base[e * self.dim + e].abs())
            .sum::<f64>()
            / self.dim as f64
    }

    fn check_dim(&self, x: &Topology, context: &'static str) -> Result<(), QuboError> {
        if x.len() != self.dim {
            return Err(QuboError::DimensionMismatch {
                context,
                expected: self.dim,
                actual: x.len(),
            });
        }
        Ok(())
    }

    fn quadratic_form(matrix: &[f64], dim: usize, x: &Topology) -> f64 {
        let active: Vec<usize> = x.active_links().collect();
        let mut total = 0.0;
        for (pos, &e) in active.iter().enumerate() {
            total += matrix[e * dim + e];
            for &f in &active[pos + 1..] {
                total += 2.0 * matrix[e * dim + f];
            }
        }
        total
    }

    /// `x^T Q x` under the current (possibly penalized) matrix.
    pub fn objective(&self, x: &Topology) -> Result<f64, QuboError> {
        self.check_dim(x, "objective")?;
        Ok(Self::quadratic_form(&self.q, self.dim, x))
    }

    /// `x^T Q_0 x` under the un-penalized base matrix.
    pub fn base_objective(&self, x: &Topology) -> Result<f64, QuboError> {
        self.check_dim(x, "base objective")?;
        Ok(Self::quadratic_form(&self.base, self.dim, x))
    }

    /// Applies the frequency penalty of one offline round: for each link,
    /// `f_e` is its activation frequency across `samples` and the diagonal
    /// gains `lambda * f_e`. Penalties accumulate across calls.
    pub fn apply_frequency_penalty(
        &mut self,
        samples: &[Topology],
        lambda: f64,
    ) -> Result<(), QuboError> {
        if samples.is_empty() {
            return Err(QuboError::EmptySamples);
        }
        if !(lambda >= 0.0) {
            return Err(QuboError::NegativeLambda(lambda));
        }
        for sample in samples {
            self.check_dim(sample, "penalty sample")?;
        }
        let k = samples.len() as f64;
        for e in 0..self.dim {
            let count = samples.iter().filter(|s| s.is_active(e)).count() as f64;
            let freq = count / k;
            self.penalty_accum[e] += lambda * freq;
            self.q[e * self.dim + e] = self.base[e * self.dim + e] + self.penalty_accum[e];
        }
        Ok(())
    }

    /// Maximum symmetry violation |q_ij - q_ji|; zero by construction, kept
    /// for invariant checks.
    pub fn symmetry_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in (i + 1)..self.dim {
                worst = worst.max((self.q[i * self.dim + j] - self.q[j * self.dim + i]).abs());
            }
        }
        worst
    }

    /// Exchange form of the current matrix: diagonal and upper-triangular
    /// nonzeros.
    pub fn to_exchange(&self) -> QuboExchange {
        let mut entries = Vec::new();
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = self.q[i * self.dim + j];
                if v != 0.0 {
                    entries.push((i, j, v));
                }
            }
        }
        QuboExchange {
            dim: self.dim,
            entries,
        }
    }

    pub fn from_exchange(exchange: &QuboExchange) -> Result<Self, QuboError> {
        Self::from_entries(exchange.dim, &exchange.entries)
    }
}

/// Wire format for QUBO matrices: `{dim, entries: [[e, e', coeff], ...]}`
/// listing diagonal and upper-triangular nonzeros.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuboExchange {
    pub dim: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

/// Builds the QUBO matrix from capacities and trade-off weights.
pub fn build_qubo(
    snapshot: &NetworkSnapshot,
    index: &LinkIndex,
    caps: &CapacityTable,
    params: &ObjectiveParams,
) -> Result<QuboMatrix, QuboError> {
    params.validate()?;
    let m = index.num_links();
    if caps.cap.len() != m {
        return Err(QuboError::DimensionMismatch {
            context: "capacity table",
            expected: m,
            actual: caps.cap.len(),
        });
    }
    if index.num_nodes() != snapshot.num_nodes() {
        return Err(QuboError::DimensionMismatch {
            context: "link index nodes",
            expected: snapshot.num_nodes(),
            actual: index.num_nodes(),
        });
    }
    let mut q = vec![0.0; m * m];
    for e in 0..m {
        let c = caps.cap[e];
        q[e * m + e] = -params.alpha * c + 2.0 * params.beta * c * c;
    }
    // Links sharing exactly one node couple through that node's squared load.
    for node in 0..index.num_nodes() {
        let inc = index.incident(node);
        for (pos, &e) in inc.iter().enumerate() {
            for &f in &inc[pos + 1..] {
                let coupling = params.beta * caps.cap[e] * caps.cap[f];
                q[e * m + f] += coupling;
                q[f * m + e] += coupling;
            }
        }
    }
    Ok(QuboMatrix {
        dim: m,
        base: q.clone(),
        q,
        penalty_accum: vec![0.0; m],
    })
}

/// Throughput, fragility, and combined objective of a topology, evaluated
/// directly from capacities without going through the matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decomposition {
    pub throughput: f64,
    pub fragility: f64,
    pub objective: f64,
}

pub fn evaluate_decomposed(
    x: &Topology,
    caps: &CapacityTable,
    index: &LinkIndex,
    params: &ObjectiveParams,
) -> Result<Decomposition, QuboError> {
    let m = index.num_links();
    if x.len() != m {
        return Err(QuboError::DimensionMismatch {
            context: "topology",
            expected: m,
            actual: x.len(),
        });
    }
    if caps.cap.len() != m {
        return Err(QuboError::DimensionMismatch {
            context: "capacity table",
            expected: m,
            actual: caps.cap.len(),
        });
    }
    let throughput: f64 = x.active_links().map(|e| caps.cap[e]).sum();
    let mut fragility = 0.0;
    for node in 0..index.num_nodes() {
        let load: f64 = index
            .incident(node)
            .iter()
            .filter(|&&e| x.is_active(e))
            .map(|&e| caps.cap[e])
            .sum();
        fragility += load * load;
    }
    Ok(Decomposition {
        throughput,
        fragility,
        objective: -params.alpha * throughput + params.beta * fragility,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::testutil::{triangle, unit_caps};
    use crate::net::{build_link_index, compute_capacities, NetworkSnapshot, RadioParams};

    fn triangle_qubo(alpha: f64, beta: f64) -> (QuboMatrix, LinkIndex, CapacityTable) {
        let (snap, index) = triangle();
        let caps = unit_caps(3);
        let params = ObjectiveParams::new(alpha, beta).unwrap();
        let q = build_qubo(&snap, &index, &caps, &params).unwrap();
        (q, index, caps)
    }

    /// Independent oracle: expand the objective definition by hand over the
    /// node loads, without touching the matrix or `evaluate_decomposed`.
    fn oracle_objective(
        x: &Topology,
        caps: &CapacityTable,
        index: &LinkIndex,
        alpha: f64,
        beta: f64,
    ) -> f64 {
        let mut throughput = 0.0;
        for e in 0..index.num_links() {
            if x.is_active(e) {
                throughput += caps.cap[e];
            }
        }
        let mut fragility = 0.0;
        for node in 0..index.num_nodes() {
            let mut load = 0.0;
            for e in 0..index.num_links() {
                let (i, j) = index.pair(e);
                if (i == node || j == node) && x.is_active(e) {
                    load += caps.cap[e];
                }
            }
            fragility += load * load;
        }
        -alpha * throughput + beta * fragility
    }

    #[test]
    fn triangle_matrix_entries() {
        let (q, _, _) = triangle_qubo(1.0, 0.01);
        for e in 0..3 {
            assert!((q.entry(e, e) - (-0.98)).abs() < 1e-12);
        }
        // Every pair of triangle links shares exactly one node.
        for e in 0..3 {
            for f in 0..3 {
                if e != f {
                    assert!((q.entry(e, f) - 0.01).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn beta_zero_is_diagonal() {
        let (snap, index) = triangle();
        let caps = compute_capacities(&snap, &index).unwrap();
        let params = ObjectiveParams::new(1.5, 0.0).unwrap();
        let q = build_qubo(&snap, &index, &caps, &params).unwrap();
        for e in 0..3 {
            assert!((q.entry(e, e) - (-1.5 * caps.cap[e])).abs() < 1e-12);
            for f in 0..3 {
                if e != f {
                    assert_eq!(q.entry(e, f), 0.0);
                }
            }
        }
    }

    #[test]
    fn alpha_zero_single_link() {
        let snap = NetworkSnapshot::new(
            vec![[0.0; 3], [50.0, 0.0, 0.0]],
            RadioParams::default(),
        )
        .unwrap();
        let index = build_link_index(&snap).unwrap();
        let c = 3.5;
        let caps = CapacityTable {
            cap: vec![c],
            snr: vec![1.0],
        };
        let params = ObjectiveParams::new(0.0, 0.25).unwrap();
        let q = build_qubo(&snap, &index, &caps, &params).unwrap();
        assert!((q.entry(0, 0) - 2.0 * 0.25 * c * c).abs() < 1e-12);
    }

    #[test]
    fn triangle_objective_values() {
        let (q, index, caps) = triangle_qubo(1.0, 0.01);

        let empty = Topology::zeros(3);
        assert_eq!(q.objective(&empty).unwrap(), 0.0);

        // Frozen values from the 8-state enumeration of the oracle.
        let full = Topology::ones(3);
        let expected_full = oracle_objective(&full, &caps, &index, 1.0, 0.01);
        assert!((expected_full - (-2.88)).abs() < 1e-12);
        assert!((q.objective(&full).unwrap() - (-2.88)).abs() < 1e-9);

        let single = Topology::from_bits(vec![1, 0, 0]).unwrap();
        let expected_single = oracle_objective(&single, &caps, &index, 1.0, 0.01);
        assert!((expected_single - (-0.98)).abs() < 1e-12);
        assert!((q.objective(&single).unwrap() - (-0.98)).abs() < 1e-9);

        // Full 8-state sweep against the oracle.
        for bits in 0u8..8 {
            let x = Topology::from_bits(vec![bits & 1, (bits >> 1) & 1, (bits >> 2) & 1])
                .unwrap();
            let want = oracle_objective(&x, &caps, &index, 1.0, 0.01);
            assert!((q.objective(&x).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn decomposed_matches_examples() {
        let (_, index, caps) = triangle_qubo(1.0, 0.01);
        let params = ObjectiveParams::new(1.0, 0.01).unwrap();

        let full = Topology::ones(3);
        let d = evaluate_decomposed(&full, &caps, &index, &params).unwrap();
        assert!((d.throughput - 3.0).abs() < 1e-12);
        assert!((d.fragility - 12.0).abs() < 1e-12);
        assert!((d.objective - (-2.88)).abs() < 1e-12);

        let empty = Topology::zeros(3);
        let d = evaluate_decomposed(&empty, &caps, &index, &params).unwrap();
        assert_eq!((d.throughput, d.fragility, d.objective), (0.0, 0.0, 0.0));
    }

    #[test]
    fn single_link_decomposition() {
        let snap = NetworkSnapshot::new(
            vec![[0.0; 3], [50.0, 0.0, 0.0]],
            RadioParams::default(),
        )
        .unwrap();
        let index = build_link_index(&snap).unwrap();
        let c = 2.5;
        let caps = CapacityTable {
            cap: vec![c],
            snr: vec![1.0],
        };
        let params = ObjectiveParams::new(1.0, 0.1).unwrap();
        let x = Topology::ones(1);
        let d = evaluate_decomposed(&x, &caps, &index, &params).unwrap();
        assert!((d.throughput - c).abs() < 1e-12);
        assert!((d.fragility - 2.0 * c * c).abs() < 1e-12);
    }

    #[test]
    fn frequency_penalty_arithmetic() {
        let (mut q, _, _) = triangle_qubo(1.0, 0.01);
        let before = q.entry(0, 0);
        // Link 0 active in 3 of 4 samples -> f = 0.75.
        let samples = vec![
            Topology::from_bits(vec![1, 0, 0]).unwrap(),
            Topology::from_bits(vec![1, 1, 0]).unwrap(),
            Topology::from_bits(vec![1, 0, 1]).unwrap(),
            Topology::from_bits(vec![0, 0, 0]).unwrap(),
        ];
        let lambda = 2.0;
        q.apply_frequency_penalty(&samples, lambda).unwrap();
        assert!((q.entry(0, 0) - (before + lambda * 0.75)).abs() < 1e-12);
        // Link never active: diagonal unchanged... link 2 active once (f=0.25).
        assert!((q.penalty_accum()[2] - lambda * 0.25).abs() < 1e-12);

        // A link inactive in all samples keeps its diagonal.
        let (mut q2, _, _) = triangle_qubo(1.0, 0.01);
        let quiet = vec![Topology::from_bits(vec![1, 1, 0]).unwrap()];
        let d2 = q2.entry(2, 2);
        q2.apply_frequency_penalty(&quiet, 1.0).unwrap();
        assert_eq!(q2.entry(2, 2), d2);
    }

    #[test]
    fn penalties_accumulate_across_calls() {
        let (mut q, _, _) = triangle_qubo(1.0, 0.01);
        let samples = vec![
            Topology::from_bits(vec![1, 1, 0]).unwrap(),
            Topology::from_bits(vec![1, 0, 0]).unwrap(),
        ];
        q.apply_frequency_penalty(&samples, 1.0).unwrap();
        let after_one: Vec<f64> = q.penalty_accum().to_vec();
        q.apply_frequency_penalty(&samples, 1.0).unwrap();
        for (p1, p2) in after_one.iter().zip(q.penalty_accum()) {
            assert!((p2 - 2.0 * p1).abs() < 1e-12);
        }
        // Base objective is unaffected by penalties.
        let x = Topology::ones(3);
        assert!((q.base_objective(&x).unwrap() - (-2.88)).abs() < 1e-9);
        assert!(q.objective(&x).unwrap() > q.base_objective(&x).unwrap());
    }

    #[test]
    fn penalty_preserves_symmetry_and_offdiagonals() {
        let (mut q, _, _) = triangle_qubo(1.0, 0.01);
        let off_before: Vec<f64> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| q.entry(i, j))
            .collect();
        let samples = vec![Topology::ones(3)];
        q.apply_frequency_penalty(&samples, 3.0).unwrap();
        assert!(q.symmetry_error() <= 1e-12);
        let off_after: Vec<f64> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| q.entry(i, j))
            .collect();
        assert_eq!(off_before, off_after);
    }

    #[test]
    fn penalty_error_paths() {
        let (mut q, _, _) = triangle_qubo(1.0, 0.01);
        assert!(matches!(
            q.apply_frequency_penalty(&[], 1.0),
            Err(QuboError::EmptySamples)
        ));
        let samples = vec![Topology::ones(3)];
        assert!(matches!(
            q.apply_frequency_penalty(&samples, -0.5),
            Err(QuboError::NegativeLambda(_))
        ));
        let wrong = vec![Topology::ones(2)];
        assert!(q.apply_frequency_penalty(&wrong, 1.0).is_err());
    }

    #[test]
    fn exchange_round_trip() {
        let (mut q, _, _) = triangle_qubo(1.0, 0.01);
        q.apply_frequency_penalty(&[Topology::ones(3)], 0.5).unwrap();
        let exchange = q.to_exchange();
        assert_eq!(exchange.dim, 3);
        // Upper triangle only.
        assert!(exchange.entries.iter().all(|&(a, b, _)| a <= b));
        let back = QuboMatrix::from_exchange(&exchange).unwrap();
        let x = Topology::from_bits(vec![1, 0, 1]).unwrap();
        assert!((back.objective(&x).unwrap() - q.objective(&x).unwrap()).abs() < 1e-12);

        let bad = QuboExchange {
            dim: 2,
            entries: vec![(1, 0, 1.0)],
        };
        assert!(QuboMatrix::from_exchange(&bad).is_err());
    }

    #[test]
    fn objective_dimension_mismatch() {
        let (q, _, _) = triangle_qubo(1.0, 0.01);
        let x = Topology::ones(4);
        assert!(matches!(
            q.objective(&x),
            Err(QuboError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn params_validation() {
        assert!(ObjectiveParams::new(0.0, 0.0).is_err());
        assert!(ObjectiveParams::new(-1.0, 0.1).is_err());
        assert!(ObjectiveParams::new(0.0, 0.1).is_ok());
    }
}
