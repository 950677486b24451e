//! Inter-agent weight matrices.
//!
//! A [`Topology`] holds a symmetric matrix `L` with nonnegative off-diagonal
//! weights and diagonal `L_ii = -Σ_{j≠i} L_ij`, so every row and column sums to
//! zero. Construction rejects graphs that are disconnected or for which
//! `‖I + L − 11ᵀ/m‖ = max(|1+ρ₂|, |1+ρ_m|)` is not below one.
//!
//! Eigenvalues are named `ρ_1 = 0 ≥ ρ_2 ≥ … ≥ ρ_m`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, EigenError};

/// `ρ₂ ≥ -CONNECTIVITY_TOLERANCE` is treated as a second zero eigenvalue.
pub const CONNECTIVITY_TOLERANCE: f64 = 1e-9;

/// Per-entry tolerance on `L·1 = 0`.
pub const ROW_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TopologyError {
    #[error("topology needs at least one agent")]
    Empty,
    #[error("invalid edge ({i}, {j}, {weight}): {reason}")]
    InvalidEdge {
        i: usize,
        j: usize,
        weight: f64,
        reason: &'static str,
    },
    #[error("duplicate edge between agents {i} and {j}")]
    DuplicateEdge { i: usize, j: usize },
    #[error("interaction graph is disconnected (rho_2 = {rho2:e})")]
    DisconnectedGraph { rho2: f64 },
    #[error("spectral condition violated: ||I + L - 11^T/m|| = {norm} >= 1")]
    SpectralConditionViolated { norm: f64 },
    #[error("row {row} of L sums to {sum:e}")]
    RowSum { row: usize, sum: f64 },
    #[error("largest eigenvalue of L is {rho1:e}, expected 0")]
    NonzeroTopEigenvalue { rho1: f64 },
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// An undirected weighted edge. Agent indices are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

impl Edge {
    pub fn new(i: usize, j: usize, weight: f64) -> Self {
        Self { i, j, weight }
    }
}

/// A validated weight matrix with its cached spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    m: usize,
    weights: Vec<f64>,
    /// Ascending: `[ρ_m, …, ρ_2, ρ_1]`.
    eigenvalues: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
}

/// Builds `L` from an edge list and checks every structural and spectral
/// condition. The diagonal is derived, never supplied.
pub fn build_topology(m: usize, edges: &[Edge]) -> Result<Topology, TopologyError> {
    if m == 0 {
        return Err(TopologyError::Empty);
    }
    let mut weights = vec![0.0; m * m];
    for e in edges {
        let bad = |reason| TopologyError::InvalidEdge {
            i: e.i,
            j: e.j,
            weight: e.weight,
            reason,
        };
        if e.i == 0 || e.j == 0 || e.i > m || e.j > m {
            return Err(bad("agent index outside 1..=m"));
        }
        if e.i == e.j {
            return Err(bad("self loop"));
        }
        if !(e.weight.is_finite() && e.weight > 0.0) {
            return Err(bad("weight must be positive and finite"));
        }
        let (a, b) = (e.i - 1, e.j - 1);
        if weights[a * m + b] != 0.0 {
            return Err(TopologyError::DuplicateEdge {
                i: e.i.min(e.j),
                j: e.i.max(e.j),
            });
        }
        weights[a * m + b] = e.weight;
        weights[b * m + a] = e.weight;
    }
    for i in 0..m {
        let off: f64 = (0..m).filter(|&j| j != i).map(|j| weights[i * m + j]).sum();
        weights[i * m + i] = -off;
    }
    for i in 0..m {
        let sum: f64 = weights[i * m..(i + 1) * m].iter().sum();
        if sum.abs() > ROW_SUM_TOLERANCE {
            return Err(TopologyError::RowSum { row: i, sum });
        }
    }

    let eigenvalues = linalg::symmetric_eigenvalues(&weights, m)?;
    let rho1 = eigenvalues[m - 1];
    if rho1.abs() > CONNECTIVITY_TOLERANCE {
        return Err(TopologyError::NonzeroTopEigenvalue { rho1 });
    }
    if m >= 2 {
        let rho2 = eigenvalues[m - 2];
        if rho2 >= -CONNECTIVITY_TOLERANCE {
            return Err(TopologyError::DisconnectedGraph { rho2 });
        }
    }

    let neighbors = (0..m)
        .map(|i| {
            (0..m)
                .filter(|&j| j != i && weights[i * m + j] > 0.0)
                .map(|j| (j, weights[i * m + j]))
                .collect()
        })
        .collect();
    let topology = Topology {
        m,
        weights,
        eigenvalues,
        neighbors,
    };
    let norm = topology.assumption_norm();
    if norm >= 1.0 {
        return Err(TopologyError::SpectralConditionViolated { norm });
    }
    Ok(topology)
}

impl Topology {
    /// Cycle `1 – 2 – … – m – 1` with uniform weight.
    pub fn ring(m: usize, weight: f64) -> Result<Self, TopologyError> {
        let edges: Vec<Edge> = match m {
            0 | 1 => Vec::new(),
            2 => vec![Edge::new(1, 2, weight)],
            _ => (1..=m).map(|i| Edge::new(i, i % m + 1, weight)).collect(),
        };
        build_topology(m, &edges)
    }

    pub fn complete(m: usize, weight: f64) -> Result<Self, TopologyError> {
        let mut edges = Vec::new();
        for i in 1..=m {
            for j in (i + 1)..=m {
                edges.push(Edge::new(i, j, weight));
            }
        }
        build_topology(m, &edges)
    }

    pub fn path(m: usize, weight: f64) -> Result<Self, TopologyError> {
        let edges: Vec<Edge> = (1..m).map(|i| Edge::new(i, i + 1, weight)).collect();
        build_topology(m, &edges)
    }

    pub fn agents(&self) -> usize {
        self.m
    }

    /// `L_ij` with 0-based indices.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i * self.m + j]
    }

    /// Row-major `m × m` copy of `L`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Neighbors of agent `i` (0-based) with their weights `L_ij > 0`.
    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.neighbors[i]
    }

    /// Ascending eigenvalues `[ρ_m, …, ρ_1]`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `ρ_i` in the 1-based descending convention.
    pub fn rho(&self, i: usize) -> f64 {
        assert!(i >= 1 && i <= self.m, "eigenvalue index {i} out of 1..={}", self.m);
        self.eigenvalues[self.m - i]
    }

    /// `‖I + L − 11ᵀ/m‖`, zero for a single agent.
    pub fn assumption_norm(&self) -> f64 {
        if self.m < 2 {
            return 0.0;
        }
        let rho2 = self.rho(2);
        let rho_m = self.rho(self.m);
        (1.0 + rho2).abs().max((1.0 + rho_m).abs())
    }

    /// `L` with the diagonal replaced by zeros, and its spectral norm.
    pub fn off_diagonal(&self) -> Result<OffDiagonalTopology<'_>, TopologyError> {
        let mut weights0 = self.weights.clone();
        for i in 0..self.m {
            weights0[i * self.m + i] = 0.0;
        }
        let norm0 = linalg::symmetric_spectral_norm(&weights0, self.m)?;
        Ok(OffDiagonalTopology {
            base: self,
            weights0,
            norm0,
        })
    }
}

/// `L⁰`: the off-diagonal part of a validated topology.
#[derive(Debug, Clone)]
pub struct OffDiagonalTopology<'a> {
    pub base: &'a Topology,
    pub weights0: Vec<f64>,
    pub norm0: f64,
}

/// `|ρ₂|`; zero for a single agent.
pub fn spectral_gap(t: &Topology) -> f64 {
    if t.m < 2 {
        0.0
    } else {
        t.rho(2).abs()
    }
}

/// `‖(1−α)(I − 11ᵀ/m) + χL‖` from the cached spectrum:
/// `max{|1 − α + χρ_i| : i = 2..m} ∪ {0}`.
pub fn contraction_norm(t: &Topology, alpha: f64, chi: f64) -> Result<f64, TopologyError> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(TopologyError::ParameterOutOfRange(format!(
            "alpha = {alpha} not in [0, 1)"
        )));
    }
    if !(chi.is_finite() && chi >= 0.0) {
        return Err(TopologyError::ParameterOutOfRange(format!(
            "chi = {chi} must be finite and nonnegative"
        )));
    }
    Ok((2..=t.m)
        .map(|i| (1.0 - alpha + chi * t.rho(i)).abs())
        .fold(0.0, f64::max))
}
