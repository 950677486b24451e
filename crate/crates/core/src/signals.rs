//! Per-agent reference signals `r_i^k` and drift certification.
//!
//! A damped sinusoid is `a + b·sin(ω k) / (s·k^p)` per coordinate. At `k = 0`
//! it takes its continuous extension: `a` when `p < 1`, `a + b·ω/s` when
//! `p = 1`. Larger damping exponents are singular at the origin and rejected.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schedules::{ScheduleError, ScheduleSpec, TableTail};

/// Relative tolerance of the constant-signal drift identity.
const DRIFT_IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("agent {agent} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        agent: usize,
        expected: usize,
        got: usize,
    },
    #[error("round {k} is past the end of a {len}-round signal table")]
    PastTableEnd { k: u64, len: usize },
    #[error("invalid signal: {0}")]
    Invalid(String),
    #[error("gamma^{k} = 0 but agent {agent} drifts by {drift:e}")]
    GammaZeroWithNonzeroDrift { k: u64, agent: usize, drift: f64 },
    #[error("constant signal of agent {agent} drifts by {drift:e} at round {k}, expected {expected:e}")]
    ConstantDriftMismatch {
        k: u64,
        agent: usize,
        drift: f64,
        expected: f64,
    },
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error("signal table {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

fn default_frequency() -> f64 {
    0.05
}
fn default_damping() -> f64 {
    1.0
}
fn default_scale() -> f64 {
    10.0
}

/// Signal of one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    Constant {
        value: Vec<f64>,
    },
    DampedSinusoid {
        offset: Vec<f64>,
        amplitude: Vec<f64>,
        #[serde(default = "default_frequency")]
        frequency: f64,
        #[serde(default = "default_damping")]
        damping: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    Table {
        rows: Vec<Vec<f64>>,
        #[serde(default)]
        tail: TableTail,
    },
}

impl SignalSpec {
    pub fn dim(&self) -> usize {
        match self {
            Self::Constant { value } => value.len(),
            Self::DampedSinusoid { offset, .. } => offset.len(),
            Self::Table { rows, .. } => rows.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        let all_finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Self::Constant { value } => {
                if !all_finite(value) {
                    return Err(SignalError::Invalid("constant value is not finite".into()));
                }
            }
            Self::DampedSinusoid {
                offset,
                amplitude,
                frequency,
                damping,
                scale,
            } => {
                if offset.len() != amplitude.len() {
                    return Err(SignalError::Invalid(format!(
                        "offset has {} coordinates but amplitude has {}",
                        offset.len(),
                        amplitude.len()
                    )));
                }
                if !all_finite(offset) || !all_finite(amplitude) || !frequency.is_finite() {
                    return Err(SignalError::Invalid("damped sinusoid parameters must be finite".into()));
                }
                if !(damping.is_finite() && (0.0..=1.0).contains(damping)) {
                    return Err(SignalError::Invalid(format!(
                        "damping exponent {damping} outside [0, 1] is singular at k = 0"
                    )));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(SignalError::Invalid(format!("scale {scale} must be positive")));
                }
            }
            Self::Table { rows, .. } => {
                let Some(first) = rows.first() else {
                    return Err(SignalError::Invalid("signal table is empty".into()));
                };
                if let Some(k) = rows.iter().position(|r| r.len() != first.len() || !all_finite(r)) {
                    return Err(SignalError::Invalid(format!("signal table row {k} is ragged or not finite")));
                }
            }
        }
        if self.dim() == 0 {
            return Err(SignalError::Invalid("signal has dimension 0".into()));
        }
        Ok(())
    }

    /// Writes `r^k` into `out` (length [`dim`](Self::dim)).
    pub fn sample_into(&self, k: u64, out: &mut [f64]) -> Result<(), SignalError> {
        match self {
            Self::Constant { value } => out.copy_from_slice(value),
            Self::DampedSinusoid {
                offset,
                amplitude,
                frequency,
                damping,
                scale,
            } => {
                let factor = if k == 0 {
                    if *damping == 1.0 {
                        frequency / scale
                    } else {
                        0.0
                    }
                } else {
                    let kf = k as f64;
                    (frequency * kf).sin() / (scale * kf.powf(*damping))
                };
                for ((o, a), b) in out.iter_mut().zip(offset).zip(amplitude) {
                    *o = a + b * factor;
                }
            }
            Self::Table { rows, tail } => {
                let row = match rows.get(k as usize) {
                    Some(row) => row,
                    None if *tail == TableTail::HoldLast => rows.last().expect("validated tables are nonempty"),
                    None => {
                        return Err(SignalError::PastTableEnd {
                            k,
                            len: rows.len(),
                        })
                    }
                };
                out.copy_from_slice(row);
            }
        }
        Ok(())
    }

    pub fn sample(&self, k: u64) -> Result<Vec<f64>, SignalError> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(k, &mut out)?;
        Ok(out)
    }
}

/// The signals of all `m` agents, sharing one dimension `d`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalEnsemble {
    agents: Vec<SignalSpec>,
    dim: usize,
}

impl SignalEnsemble {
    pub fn new(agents: Vec<SignalSpec>) -> Result<Self, SignalError> {
        let Some(first) = agents.first() else {
            return Err(SignalError::Invalid("no agents".into()));
        };
        let dim = first.dim();
        for (agent, spec) in agents.iter().enumerate() {
            spec.validate()?;
            if spec.dim() != dim {
                return Err(SignalError::DimensionMismatch {
                    agent,
                    expected: dim,
                    got: spec.dim(),
                });
            }
        }
        Ok(Self { agents, dim })
    }

    /// `m` damped sinusoids whose offsets and amplitudes are drawn from
    /// `U(low, high)`: per agent, `d` offsets then `d` amplitudes, from a
    /// ChaCha8 stream seeded with `seed`.
    pub fn damped_sinusoid_family(
        m: usize,
        d: usize,
        seed: u64,
        range: (f64, f64),
        frequency: f64,
        damping: f64,
        scale: f64,
    ) -> Result<Self, SignalError> {
        let (low, high) = range;
        if !(low.is_finite() && high.is_finite() && low < high) {
            return Err(SignalError::Invalid(format!("empty coefficient range [{low}, {high})")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agents = (0..m)
            .map(|_| {
                let offset = (0..d).map(|_| rng.random_range(low..high)).collect();
                let amplitude = (0..d).map(|_| rng.random_range(low..high)).collect();
                SignalSpec::DampedSinusoid {
                    offset,
                    amplitude,
                    frequency,
                    damping,
                    scale,
                }
            })
            .collect();
        Self::new(agents)
    }

    /// Reads a table with one row per round and `m·d` columns, agent-major.
    /// A leading header row is skipped if its first field is not numeric.
    pub fn from_csv(path: &Path, m: usize, d: usize, tail: TableTail) -> Result<Self, SignalError> {
        let csv_err = |source| SignalError::Csv {
            path: path.display().to_string(),
            source,
        };
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(csv_err)?;
        let mut per_agent: Vec<Vec<Vec<f64>>> = vec![Vec::new(); m];
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(csv_err)?;
            if line == 0 && record.get(0).is_some_and(|f| f.parse::<f64>().is_err()) {
                continue;
            }
            if record.len() != m * d {
                return Err(SignalError::Invalid(format!(
                    "{}: row {line} has {} columns, expected {}",
                    path.display(),
                    record.len(),
                    m * d
                )));
            }
            let values = record
                .iter()
                .map(|f| f.parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| SignalError::Invalid(format!("{}: row {line}: {e}", path.display())))?;
            for (agent, chunk) in values.chunks(d).enumerate() {
                per_agent[agent].push(chunk.to_vec());
            }
        }
        Self::new(per_agent.into_iter().map(|rows| SignalSpec::Table { rows, tail }).collect())
    }

    pub fn agents(&self) -> usize {
        self.agents.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn spec(&self, i: usize) -> &SignalSpec {
        &self.agents[i]
    }

    pub fn sample(&self, i: usize, k: u64) -> Result<Vec<f64>, SignalError> {
        self.agents[i].sample(k)
    }

    /// All agents' `r_i^k`, agent-major, into `out` of length `m·d`.
    pub fn sample_all_into(&self, k: u64, out: &mut [f64]) -> Result<(), SignalError> {
        for (spec, chunk) in self.agents.iter().zip(out.chunks_mut(self.dim)) {
            spec.sample_into(k, chunk)?;
        }
        Ok(())
    }

    pub fn sample_all(&self, k: u64) -> Result<Vec<f64>, SignalError> {
        let mut out = vec![0.0; self.agents() * self.dim];
        self.sample_all_into(k, &mut out)?;
        Ok(out)
    }

    /// `r̄^k`.
    pub fn average(&self, k: u64) -> Result<Vec<f64>, SignalError> {
        Ok(column_mean(&self.sample_all(k)?, self.dim))
    }

    /// A copy with agent `i` replaced, for adjacent-problem comparisons.
    pub fn with_agent(&self, i: usize, spec: SignalSpec) -> Result<Self, SignalError> {
        let mut agents = self.agents.clone();
        agents[i] = spec;
        Self::new(agents)
    }
}

/// Mean over agents of an agent-major `m·d` buffer.
pub(crate) fn column_mean(values: &[f64], d: usize) -> Vec<f64> {
    let m = values.len() / d;
    let mut mean = vec![0.0; d];
    for chunk in values.chunks(d) {
        for (acc, v) in mean.iter_mut().zip(chunk) {
            *acc += v;
        }
    }
    for v in &mut mean {
        *v /= m as f64;
    }
    mean
}

fn norm(v: impl Iterator<Item = f64>) -> f64 {
    v.map(|x| x * x).sum::<f64>().sqrt()
}

/// Verified drift bound `‖r_i^{k+1} − (1−α^k) r_i^k‖ ≤ γ^k · c` for `k ≤ horizon_checked`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftCertificate {
    pub c: f64,
    pub gamma: ScheduleSpec,
    pub horizon_checked: u64,
    /// `max ‖r_i^{k+1} − r_i^k‖` over the same rounds.
    pub max_increment: f64,
    pub dim: usize,
}

impl DriftCertificate {
    /// `√d · c`, the constant entering the sensitivity bound.
    pub fn c_bar(&self) -> f64 {
        (self.dim as f64).sqrt() * self.c
    }

    /// Re-checks the bound at round `k`; returns the slack `γ^k·c − drift_max`.
    pub fn slack_at(&self, signals: &SignalEnsemble, alpha: &ScheduleSpec, k: u64) -> Result<f64, SignalError> {
        let a = alpha.eval(k)?;
        let g = self.gamma.eval(k)?;
        let mut worst: f64 = 0.0;
        for i in 0..signals.agents() {
            let now = signals.sample(i, k)?;
            let next = signals.sample(i, k + 1)?;
            worst = worst.max(norm(next.iter().zip(&now).map(|(n, c)| n - (1.0 - a) * c)));
        }
        Ok(g * self.c - worst)
    }
}

/// Computes the smallest `c` with `‖r_i^{k+1} − (1−α^k) r_i^k‖ ≤ γ^k c` for
/// every agent and `0 ≤ k ≤ horizon`.
pub fn certify_drift(
    signals: &SignalEnsemble,
    alpha: &ScheduleSpec,
    gamma: &ScheduleSpec,
    horizon: u64,
) -> Result<DriftCertificate, SignalError> {
    if horizon < 1 {
        return Err(SignalError::Invalid("certification horizon must be at least 1".into()));
    }
    let m = signals.agents();
    let d = signals.dim();
    let mut now = signals.sample_all(0)?;
    let mut next = vec![0.0; m * d];
    let mut c: f64 = 0.0;
    let mut max_increment: f64 = 0.0;
    for k in 0..=horizon {
        signals.sample_all_into(k + 1, &mut next)?;
        let a = alpha.eval(k)?;
        let g = gamma.eval(k)?;
        for i in 0..m {
            let (ri, ri1) = (&now[i * d..(i + 1) * d], &next[i * d..(i + 1) * d]);
            let drift = norm(ri1.iter().zip(ri).map(|(n, c)| n - (1.0 - a) * c));
            max_increment = max_increment.max(norm(ri1.iter().zip(ri).map(|(n, c)| n - c)));
            if let SignalSpec::Constant { value } = signals.spec(i) {
                let size = norm(value.iter().copied());
                let expected = a * size;
                // r − (1−α) r cancels, leaving rounding error of order ε‖r‖.
                let allowed = DRIFT_IDENTITY_TOLERANCE * expected + 8.0 * f64::EPSILON * size;
                if (drift - expected).abs() > allowed {
                    return Err(SignalError::ConstantDriftMismatch {
                        k,
                        agent: i,
                        drift,
                        expected,
                    });
                }
            }
            if g == 0.0 {
                if drift != 0.0 {
                    return Err(SignalError::GammaZeroWithNonzeroDrift { k, agent: i, drift });
                }
            } else {
                c = c.max(drift / g);
            }
        }
        std::mem::swap(&mut now, &mut next);
    }
    Ok(DriftCertificate {
        c,
        gamma: gamma.clone(),
        horizon_checked: horizon,
        max_increment,
        dim: d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn alpha() -> ScheduleSpec {
        ScheduleSpec::power_law(0.01, 1.0).unwrap()
    }
    fn gamma() -> ScheduleSpec {
        ScheduleSpec::power_law(1.0, 1.0).unwrap()
    }

    fn scalar_sinusoid(a: f64, b: f64) -> SignalSpec {
        SignalSpec::DampedSinusoid {
            offset: vec![a],
            amplitude: vec![b],
            frequency: 0.05,
            damping: 1.0,
            scale: 10.0,
        }
    }

    #[test]
    fn constant_signal_is_constant() {
        let s = SignalSpec::Constant { value: vec![3.0] };
        for k in [0, 1, 1_000_000] {
            assert_eq!(s.sample(k).unwrap(), vec![3.0]);
        }
    }

    #[test]
    fn damped_sinusoid_example() {
        let v = scalar_sinusoid(5.0, 10.0).sample(20).unwrap()[0];
        assert!((v - (5.0 + 0.05 * 1f64.sin())).abs() < 1e-15);
        assert!((v - 5.04207).abs() < 1e-5);
    }

    #[test]
    fn damped_sinusoid_origin_is_the_continuous_extension() {
        let s = scalar_sinusoid(5.0, 10.0);
        assert!((s.sample(0).unwrap()[0] - 5.05).abs() < 1e-15);
        let tiny = 1e-7_f64;
        let limit = 5.0 + 10.0 * (0.05 * tiny).sin() / (10.0 * tiny);
        assert!((s.sample(0).unwrap()[0] - limit).abs() < 1e-9);

        let slow = SignalSpec::DampedSinusoid {
            offset: vec![5.0],
            amplitude: vec![10.0],
            frequency: 0.05,
            damping: 0.5,
            scale: 10.0,
        };
        assert_eq!(slow.sample(0).unwrap(), vec![5.0]);
    }

    #[test]
    fn envelope_bounds_the_oscillation() {
        let s = scalar_sinusoid(2.0, 7.0);
        for k in 1..2000u64 {
            let v = s.sample(k).unwrap()[0];
            assert!((v - 2.0).abs() <= 7.0 / (10.0 * k as f64) + 1e-15);
        }
    }

    #[test]
    fn overdamped_sinusoid_is_rejected() {
        let s = SignalSpec::DampedSinusoid {
            offset: vec![0.0],
            amplitude: vec![1.0],
            frequency: 0.05,
            damping: 1.5,
            scale: 10.0,
        };
        assert!(SignalEnsemble::new(vec![s]).is_err());
    }

    #[test]
    fn mixed_dimensions_are_rejected() {
        let err = SignalEnsemble::new(vec![
            SignalSpec::Constant { value: vec![1.0] },
            SignalSpec::Constant { value: vec![1.0, 2.0] },
        ])
        .unwrap_err();
        assert!(matches!(err, SignalError::DimensionMismatch { agent: 1, .. }));
    }

    #[test]
    fn table_tail_rules() {
        let rows = vec![vec![1.0], vec![2.0]];
        let hold = SignalSpec::Table {
            rows: rows.clone(),
            tail: TableTail::HoldLast,
        };
        assert_eq!(hold.sample(9).unwrap(), vec![2.0]);
        let strict = SignalSpec::Table {
            rows,
            tail: TableTail::Error,
        };
        assert!(matches!(strict.sample(2), Err(SignalError::PastTableEnd { k: 2, len: 2 })));
    }

    #[test]
    fn family_is_seeded_and_in_range() {
        let a = SignalEnsemble::damped_sinusoid_family(5, 2, 7, (0.0, 10.0), 0.05, 1.0, 10.0).unwrap();
        let b = SignalEnsemble::damped_sinusoid_family(5, 2, 7, (0.0, 10.0), 0.05, 1.0, 10.0).unwrap();
        let c = SignalEnsemble::damped_sinusoid_family(5, 2, 8, (0.0, 10.0), 0.05, 1.0, 10.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        for i in 0..5 {
            let SignalSpec::DampedSinusoid { offset, amplitude, .. } = a.spec(i) else {
                panic!("wrong kind");
            };
            assert!(offset.iter().chain(amplitude).all(|v| (0.0..10.0).contains(v)));
        }
    }

    #[test]
    fn average_is_the_agent_mean() {
        let e = SignalEnsemble::new(vec![
            SignalSpec::Constant { value: vec![1.0, 0.0] },
            SignalSpec::Constant { value: vec![3.0, 4.0] },
        ])
        .unwrap();
        assert_eq!(e.average(5).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn constant_drift_certificate_is_tight() {
        let e = SignalEnsemble::new(vec![SignalSpec::Constant { value: vec![3.0] }]).unwrap();
        let cert = certify_drift(&e, &alpha(), &gamma(), 1000).unwrap();
        assert!((cert.c / 0.03 - 1.0).abs() < 1e-9);
        let worst = (0..1000)
            .map(|k| cert.slack_at(&e, &alpha(), k).unwrap())
            .fold(f64::INFINITY, f64::min);
        assert!(worst.abs() < 1e-12);
    }

    #[test]
    fn zero_signal_has_zero_drift() {
        let e = SignalEnsemble::new(vec![SignalSpec::Constant { value: vec![0.0, 0.0] }]).unwrap();
        let cert = certify_drift(&e, &alpha(), &gamma(), 100).unwrap();
        assert_eq!(cert.c, 0.0);
        assert_eq!(cert.c_bar(), 0.0);
    }

    #[test]
    fn zero_gamma_with_drift_is_an_error() {
        let e = SignalEnsemble::new(vec![SignalSpec::Constant { value: vec![1.0] }]).unwrap();
        let gamma = ScheduleSpec::table(vec![1.0, 0.0], TableTail::HoldLast).unwrap();
        let err = certify_drift(&e, &alpha(), &gamma, 10).unwrap_err();
        assert!(matches!(err, SignalError::GammaZeroWithNonzeroDrift { k: 1, .. }));
    }

    #[test]
    fn c_bar_scales_with_root_dimension() {
        let e = SignalEnsemble::new(vec![SignalSpec::Constant { value: vec![3.0, 4.0, 0.0, 0.0] }]).unwrap();
        let cert = certify_drift(&e, &alpha(), &gamma(), 10).unwrap();
        assert!((cert.c / 0.05 - 1.0).abs() < 1e-9);
        assert!((cert.c_bar() / 0.1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn csv_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("signals.csv");
        std::fs::write(&path, "a0,a1,b0,b1\n1,2,3,4\n5,6,7,8\n").unwrap();
        let e = SignalEnsemble::from_csv(&path, 2, 2, TableTail::HoldLast).unwrap();
        assert_eq!(e.sample(0, 0).unwrap(), vec![1.0, 2.0]);
        assert_eq!(e.sample(1, 1).unwrap(), vec![7.0, 8.0]);
        assert_eq!(e.sample(1, 5).unwrap(), vec![7.0, 8.0]);
        std::fs::write(&path, "1,2,3\n").unwrap();
        assert!(SignalEnsemble::from_csv(&path, 2, 2, TableTail::HoldLast).is_err());
    }
}
