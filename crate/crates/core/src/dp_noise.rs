//! Seeded Laplace perturbations for outgoing messages.
//!
//! Each (master seed, run, agent) triple owns an independent ChaCha8 stream
//! whose 32-byte key is
//! `master.to_le_bytes() ‖ run.to_le_bytes() ‖ agent.to_le_bytes() ‖ b"dpacnois"`.
//! Streams depend only on the triple, never on scheduling order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::schedules::{ScheduleError, ScheduleSpec};

const STREAM_TAG: &[u8; 8] = b"dpacnois";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NoiseError {
    #[error("Laplace scale nu^{k} = {nu} is not positive")]
    NonpositiveScale { k: u64, nu: f64 },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed {
    pub master: u64,
    pub run: u64,
    pub agent: u64,
}

impl StreamSeed {
    pub fn key(&self) -> [u8; 32] {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.master.to_le_bytes());
        key[8..16].copy_from_slice(&self.run.to_le_bytes());
        key[16..24].copy_from_slice(&self.agent.to_le_bytes());
        key[24..].copy_from_slice(STREAM_TAG);
        key
    }
}

#[derive(Debug, Clone)]
enum Source {
    Laplace { nu: ScheduleSpec, rng: Box<ChaCha8Rng> },
    Zero,
}

/// Per-agent noise source.
#[derive(Debug, Clone)]
pub struct NoiseChannel {
    source: Source,
}

impl NoiseChannel {
    /// Laplace noise with scale schedule `nu`; rejects `ν^0 ≤ 0`.
    pub fn laplace(nu: ScheduleSpec, seed: StreamSeed) -> Result<Self, NoiseError> {
        nu.validate()?;
        let nu0 = nu.eval(0)?;
        if nu0.is_nan() || nu0 <= 0.0 {
            return Err(NoiseError::NonpositiveScale { k: 0, nu: nu0 });
        }
        Ok(Self {
            source: Source::Laplace {
                nu,
                rng: Box::new(ChaCha8Rng::from_seed(seed.key())),
            },
        })
    }

    pub fn zero() -> Self {
        Self { source: Source::Zero }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.source, Source::Zero)
    }

    pub fn scale(&self, k: u64) -> Result<f64, NoiseError> {
        match &self.source {
            Source::Laplace { nu, .. } => Ok(nu.eval(k)?),
            Source::Zero => Ok(0.0),
        }
    }

    /// Fills `out` with independent `Lap(ν^k)` draws.
    pub fn draw_into(&mut self, k: u64, out: &mut [f64]) -> Result<(), NoiseError> {
        match &mut self.source {
            Source::Zero => out.fill(0.0),
            Source::Laplace { nu, rng } => {
                let scale = nu.eval(k)?;
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(NoiseError::NonpositiveScale { k, nu: scale });
                }
                for v in out {
                    *v = laplace_inverse_cdf(centered_uniform(rng.as_mut()), scale);
                }
            }
        }
        Ok(())
    }

    pub fn draw(&mut self, k: u64, d: usize) -> Result<Vec<f64>, NoiseError> {
        let mut out = vec![0.0; d];
        self.draw_into(k, &mut out)?;
        Ok(out)
    }
}

/// Uniform on the open interval `(−½, ½)`: 52 random bits at bin midpoints,
/// so `|u| ≤ ½ − 2^-53` exactly.
fn centered_uniform(rng: &mut impl RngCore) -> f64 {
    let bits = rng.next_u64() >> 12;
    (bits as f64 + 0.5) * f64::powi(2.0, -52) - 0.5
}

fn laplace_inverse_cdf(u: f64, nu: f64) -> f64 {
    -nu * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// CDF of `Lap(ν)`.
pub fn laplace_cdf(x: f64, nu: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / nu).exp()
    } else {
        1.0 - 0.5 * (-x / nu).exp()
    }
}

/// One channel per agent for run `run`, or zero channels when `nu` is `None`.
pub fn channels_for_run(
    nu: Option<&ScheduleSpec>,
    master: u64,
    run: u64,
    m: usize,
) -> Result<Vec<NoiseChannel>, NoiseError> {
    (0..m)
        .map(|agent| match nu {
            None => Ok(NoiseChannel::zero()),
            Some(nu) => NoiseChannel::laplace(
                nu.clone(),
                StreamSeed {
                    master,
                    run,
                    agent: agent as u64,
                },
            ),
        })
        .collect()
}
