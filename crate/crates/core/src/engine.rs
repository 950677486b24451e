//! Synchronous consensus rounds for the proposed algorithm and the two
//! baselines.
//!
//! All three share one update, parameterized by [`UpdateCoefficients`]:
//!
//! ```text
//! x_i' = (1−α) x_i + χ Σ_j L_ij (y_j − x_i) + w (r_i' − (1−α) r_i)
//! ```
//!
//! where `y_j = x_j + ζ_j` is the single message agent `j` broadcasts to
//! every neighbor. The sender's stored state is never perturbed.
//!
//! | algorithm | α     | χ     | w       |
//! |-----------|-------|-------|---------|
//! | proposed  | `α^k` | `χ^k` | 1       |
//! | zhu       | 0     | 1     | 1       |
//! | huang     | 0     | 1     | `c·q^k` |

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dp_noise::{NoiseChannel, NoiseError};
use crate::signals::{column_mean, SignalEnsemble, SignalError};
use crate::topology::Topology;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlgorithmKind {
    Proposed,
    Zhu,
    Huang,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 3] = [Self::Proposed, Self::Zhu, Self::Huang];

    pub fn name(&self) -> &'static str {
        match self {
            Self::Proposed => "proposed",
            Self::Zhu => "zhu",
            Self::Huang => "huang",
        }
    }
}

impl std::fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateCoefficients {
    pub alpha: f64,
    pub chi: f64,
    pub input_weight: f64,
}

impl UpdateCoefficients {
    fn check(&self) -> Result<(), EngineError> {
        let ok = (0.0..1.0).contains(&self.alpha)
            && self.chi.is_finite()
            && self.chi >= 0.0
            && self.input_weight.is_finite();
        if ok {
            Ok(())
        } else {
            Err(EngineError::ParameterOutOfRange(format!(
                "need 0 <= alpha < 1, finite chi >= 0 and finite input weight, got {self:?}"
            )))
        }
    }
}

/// Agent states at round `k` with the references `r^k` and `r^{k+1}`.
/// Vectors are agent-major, `m·d` long.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusState {
    pub k: u64,
    pub x: Vec<f64>,
    pub r_curr: Vec<f64>,
    pub r_next: Vec<f64>,
    m: usize,
    d: usize,
}

impl ConsensusState {
    /// `x^0 = r^0`.
    pub fn initial(signals: &SignalEnsemble) -> Result<Self, EngineError> {
        let r_curr = signals.sample_all(0)?;
        let r_next = signals.sample_all(1)?;
        Ok(Self {
            k: 0,
            x: r_curr.clone(),
            r_curr,
            r_next,
            m: signals.agents(),
            d: signals.dim(),
        })
    }

    pub fn from_parts(k: u64, x: Vec<f64>, r_curr: Vec<f64>, r_next: Vec<f64>, d: usize) -> Result<Self, EngineError> {
        if d == 0 || x.is_empty() || !x.len().is_multiple_of(d) || r_curr.len() != x.len() || r_next.len() != x.len() {
            return Err(EngineError::DimensionMismatch(format!(
                "x, r_curr, r_next have lengths {}, {}, {} with d = {d}",
                x.len(),
                r_curr.len(),
                r_next.len()
            )));
        }
        Ok(Self {
            k,
            m: x.len() / d,
            x,
            r_curr,
            r_next,
            d,
        })
    }

    pub fn agents(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn agent(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    /// `r̄^k`.
    pub fn reference_mean(&self) -> Vec<f64> {
        column_mean(&self.r_curr, self.d)
    }
}

/// Messages `x_j^k + ζ_j^k` broadcast in round `k`, agent-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationRecord {
    pub k: u64,
    pub messages: Vec<f64>,
}

/// `x̄^k`.
pub fn mean_state(state: &ConsensusState) -> Vec<f64> {
    column_mean(&state.x, state.d)
}

fn check_shapes(state: &ConsensusState, topology: &Topology, signals: &SignalEnsemble) -> Result<(), EngineError> {
    if topology.agents() != state.m || signals.agents() != state.m || signals.dim() != state.d {
        return Err(EngineError::DimensionMismatch(format!(
            "state has {} agents of dimension {}, topology {} agents, signals {} agents of dimension {}",
            state.m,
            state.d,
            topology.agents(),
            signals.agents(),
            signals.dim()
        )));
    }
    Ok(())
}

/// Draws one message per agent.
pub fn broadcast(state: &ConsensusState, noise: &mut [NoiseChannel]) -> Result<ObservationRecord, EngineError> {
    if noise.len() != state.m {
        return Err(EngineError::DimensionMismatch(format!(
            "{} noise channels for {} agents",
            noise.len(),
            state.m
        )));
    }
    let mut messages = vec![0.0; state.x.len()];
    for (j, (channel, out)) in noise.iter_mut().zip(messages.chunks_mut(state.d)).enumerate() {
        channel.draw_into(state.k, out)?;
        for (o, x) in out.iter_mut().zip(state.agent(j)) {
            *o += x;
        }
    }
    Ok(ObservationRecord {
        k: state.k,
        messages,
    })
}

/// Applies one round given the broadcast messages.
pub fn step_with_messages(
    state: &ConsensusState,
    topology: &Topology,
    signals: &SignalEnsemble,
    coeffs: UpdateCoefficients,
    messages: &[f64],
) -> Result<ConsensusState, EngineError> {
    check_shapes(state, topology, signals)?;
    coeffs.check()?;
    if messages.len() != state.x.len() {
        return Err(EngineError::DimensionMismatch(format!(
            "{} message entries for state of length {}",
            messages.len(),
            state.x.len()
        )));
    }
    let UpdateCoefficients {
        alpha,
        chi,
        input_weight,
    } = coeffs;
    let d = state.d;
    let mut x = vec![0.0; state.x.len()];
    for i in 0..state.m {
        let xi = state.agent(i);
        let out = &mut x[i * d..(i + 1) * d];
        for l in 0..d {
            let coupling: f64 = topology
                .neighbors(i)
                .iter()
                .map(|&(j, w)| w * (messages[j * d + l] - xi[l]))
                .sum();
            let drift = state.r_next[i * d + l] - (1.0 - alpha) * state.r_curr[i * d + l];
            out[l] = (1.0 - alpha) * xi[l] + chi * coupling + input_weight * drift;
        }
    }
    Ok(ConsensusState {
        k: state.k + 1,
        x,
        r_curr: state.r_next.clone(),
        r_next: signals.sample_all(state.k + 2)?,
        m: state.m,
        d,
    })
}

/// Draws noise, broadcasts, and applies one round.
pub fn step(
    state: &ConsensusState,
    topology: &Topology,
    signals: &SignalEnsemble,
    coeffs: UpdateCoefficients,
    noise: &mut [NoiseChannel],
) -> Result<(ConsensusState, ObservationRecord), EngineError> {
    check_shapes(state, topology, signals)?;
    let record = broadcast(state, noise)?;
    let next = step_with_messages(state, topology, signals, coeffs, &record.messages)?;
    Ok((next, record))
}

pub fn step_proposed(
    state: &ConsensusState,
    topology: &Topology,
    signals: &SignalEnsemble,
    alpha: f64,
    chi: f64,
    noise: &mut [NoiseChannel],
) -> Result<(ConsensusState, ObservationRecord), EngineError> {
    let coeffs = UpdateCoefficients {
        alpha,
        chi,
        input_weight: 1.0,
    };
    step(state, topology, signals, coeffs, noise)
}

pub fn step_zhu(
    state: &ConsensusState,
    topology: &Topology,
    signals: &SignalEnsemble,
    noise: &mut [NoiseChannel],
) -> Result<(ConsensusState, ObservationRecord), EngineError> {
    step_proposed(state, topology, signals, 0.0, 1.0, noise)
}

/// `input_weight` is the round's geometric input gain `c·q^k`; the geometric
/// noise decay lives in the channels' schedules.
pub fn step_huang(
    state: &ConsensusState,
    topology: &Topology,
    signals: &SignalEnsemble,
    input_weight: f64,
    noise: &mut [NoiseChannel],
) -> Result<(ConsensusState, ObservationRecord), EngineError> {
    let coeffs = UpdateCoefficients {
        alpha: 0.0,
        chi: 1.0,
        input_weight,
    };
    step(state, topology, signals, coeffs, noise)
}
