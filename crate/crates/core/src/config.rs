//! Experiment configuration.
//!
//! TOML is the primary encoding; files ending in `.json` are read as JSON
//! with the same schema. A minimal TOML file:
//!
//! ```toml
//! name = "ring5"
//! horizon = 5000
//! runs = 100
//! master_seed = 2024
//! algorithms = ["proposed", "zhu", "huang"]
//!
//! [topology]
//! kind = "ring"
//! m = 5
//! weight = 0.2
//!
//! [signals]
//! kind = "damped_sinusoid"
//! seed = 7
//!
//! [schedules.alpha]
//! family = "power_law"
//! c = 0.01
//! p = 1.0
//!
//! [schedules.chi]
//! family = "power_law"
//! c = 2.0
//! p = 0.9
//!
//! [schedules.gamma]
//! family = "power_law"
//! c = 1.0
//! p = 1.0
//!
//! [noise]
//! mode = "explicit"
//! nu = { family = "power_law_shifted", c0 = 1.0, c1 = 0.1, p = 0.2 }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::AlgorithmKind;
use crate::schedules::{ScheduleSpec, TableTail};
use crate::signals::{SignalEnsemble, SignalError, SignalSpec};
use crate::topology::{build_topology, Edge, Topology, TopologyError};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

fn default_horizon() -> u64 {
    5000
}
fn default_runs() -> u64 {
    100
}
fn default_algorithms() -> Vec<AlgorithmKind> {
    vec![AlgorithmKind::Proposed]
}
fn default_certify_horizon() -> u64 {
    100_000
}
fn default_one() -> u64 {
    1
}
fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default = "default_horizon")]
    pub horizon: u64,
    #[serde(default = "default_runs")]
    pub runs: u64,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<AlgorithmKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Worker threads; the rayon default when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Rounds over which the signal drift bound is verified.
    #[serde(default = "default_certify_horizon")]
    pub certify_horizon: u64,
    /// Metrics CSV rows are written every this many rounds (and at the horizon).
    #[serde(default = "default_one")]
    pub metrics_every: u64,
    /// Full-state dump interval; 0 disables dumps.
    #[serde(default)]
    pub dump_every: u64,
    #[serde(default, skip_serializing_if = "is_false")]
    pub override_assumptions: bool,
    pub topology: TopologySpec,
    pub signals: SignalsConfig,
    pub schedules: SchedulesConfig,
    pub noise: NoiseConfig,
    #[serde(default)]
    pub huang: HuangConfig,
    #[serde(default)]
    pub privacy: PrivacyConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TopologySpec {
    Ring { m: usize, weight: f64 },
    Complete { m: usize, weight: f64 },
    Path { m: usize, weight: f64 },
    /// 1-based undirected edges; the diagonal is derived.
    Edges { m: usize, edges: Vec<Edge> },
}

impl TopologySpec {
    pub fn agents(&self) -> usize {
        match *self {
            Self::Ring { m, .. } | Self::Complete { m, .. } | Self::Path { m, .. } | Self::Edges { m, .. } => m,
        }
    }

    pub fn build(&self) -> Result<Topology, TopologyError> {
        match self {
            Self::Ring { m, weight } => Topology::ring(*m, *weight),
            Self::Complete { m, weight } => Topology::complete(*m, *weight),
            Self::Path { m, weight } => Topology::path(*m, *weight),
            Self::Edges { m, edges } => build_topology(*m, edges),
        }
    }
}

fn default_dim() -> usize {
    1
}
fn default_low() -> f64 {
    0.0
}
fn default_high() -> f64 {
    10.0
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalsConfig {
    /// One constant vector per agent.
    Constant { values: Vec<Vec<f64>> },
    /// Offsets and amplitudes drawn from `U(low, high)` with `seed`.
    DampedSinusoid {
        seed: u64,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_low")]
        low: f64,
        #[serde(default = "default_high")]
        high: f64,
        #[serde(default = "default_frequency")]
        frequency: f64,
        #[serde(default = "default_damping")]
        damping: f64,
        #[serde(default = "default_scale")]
        scale: f64,
    },
    /// Fully specified per-agent signals.
    Explicit { agents: Vec<SignalSpec> },
    /// Per-round rows of `m·d` values, inline or from a CSV file (resolved
    /// relative to the config file).
    Table {
        dim: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rows: Option<Vec<Vec<f64>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default)]
        tail: TableTail,
    },
}

impl SignalsConfig {
    pub fn build(&self, m: usize) -> Result<SignalEnsemble, SignalError> {
        let ensemble = match self {
            Self::Constant { values } => {
                SignalEnsemble::new(values.iter().map(|v| SignalSpec::Constant { value: v.clone() }).collect())?
            }
            Self::DampedSinusoid {
                seed,
                dim,
                low,
                high,
                frequency,
                damping,
                scale,
            } => SignalEnsemble::damped_sinusoid_family(m, *dim, *seed, (*low, *high), *frequency, *damping, *scale)?,
            Self::Explicit { agents } => SignalEnsemble::new(agents.clone())?,
            Self::Table {
                dim,
                rows,
                path,
                tail,
            } => match (rows, path) {
                (Some(rows), None) => {
                    let mut per_agent = vec![Vec::with_capacity(rows.len()); m];
                    for (k, row) in rows.iter().enumerate() {
                        if row.len() != m * dim {
                            return Err(SignalError::Invalid(format!(
                                "table row {k} has {} values, expected {}",
                                row.len(),
                                m * dim
                            )));
                        }
                        for (agent, chunk) in row.chunks(*dim).enumerate() {
                            per_agent[agent].push(chunk.to_vec());
                        }
                    }
                    SignalEnsemble::new(
                        per_agent
                            .into_iter()
                            .map(|rows| SignalSpec::Table { rows, tail: *tail })
                            .collect(),
                    )?
                }
                (None, Some(path)) => SignalEnsemble::from_csv(path, m, *dim, *tail)?,
                _ => return Err(SignalError::Invalid("a table needs exactly one of `rows` and `path`".into())),
            },
        };
        if ensemble.agents() != m {
            return Err(SignalError::Invalid(format!(
                "{} signals for {m} agents",
                ensemble.agents()
            )));
        }
        Ok(ensemble)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulesConfig {
    pub alpha: ScheduleSpec,
    pub chi: ScheduleSpec,
    pub gamma: ScheduleSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum NoiseConfig {
    /// No perturbation.
    Off,
    Explicit { nu: ScheduleSpec },
    /// `ν = (2·C̄·Φ/ε)·shape` with `Φ = Σ γ^k/shape^k`.
    Calibrated { target_epsilon: f64, shape: ScheduleSpec },
}

fn default_input_c() -> f64 {
    1.0
}
fn default_input_q() -> f64 {
    0.99
}
fn default_noise_q() -> f64 {
    0.995
}

/// Geometric baseline: input gain `input_c·input_q^k`, noise scale
/// proportional to `noise_q^k` and calibrated to the proposed budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HuangConfig {
    #[serde(default = "default_input_c")]
    pub input_c: f64,
    #[serde(default = "default_input_q")]
    pub input_q: f64,
    #[serde(default = "default_noise_q")]
    pub noise_q: f64,
    /// Sensitivity constant; by default the larger of the proposed `C̄` and
    /// `√d·max_k ‖r_i^{k+1} − r_i^k‖`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_bar: Option<f64>,
}

impl Default for HuangConfig {
    fn default() -> Self {
        Self {
            input_c: default_input_c(),
            input_q: default_input_q(),
            noise_q: default_noise_q(),
            c_bar: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacyConfig {
    /// Overrides the certified `C̄ = √d·C`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_bar: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Toml,
    Json,
}

impl Format {
    pub fn for_path(path: &Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Toml,
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, format: Format) -> Result<Self, String> {
        match format {
            Format::Toml => toml::from_str(text).map_err(|e| e.to_string()),
            Format::Json => serde_json::from_str(text).map_err(|e| e.to_string()),
        }
    }

    pub fn to_string(&self, format: Format) -> Result<String, String> {
        match format {
            Format::Toml => toml::to_string(self).map_err(|e| e.to_string()),
            Format::Json => serde_json::to_string_pretty(self).map_err(|e| e.to_string()),
        }
    }

    /// Reads a config file. Relative table paths are resolved against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let mut config = Self::parse(&text, Format::for_path(path)).map_err(|message| ConfigError::Parse {
            path: path.display().to_string(),
            message,
        })?;
        if let SignalsConfig::Table { path: Some(table), .. } = &mut config.signals {
            if table.is_relative() {
                if let Some(dir) = path.parent() {
                    *table = dir.join(&*table);
                }
            }
        }
        config.check()?;
        Ok(config)
    }

    /// Structural checks that need no numerics.
    pub fn check(&self) -> Result<(), ConfigError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(ConfigError::Invalid(format!("name {:?} must be a nonempty file name", self.name)));
        }
        if self.runs == 0 {
            return Err(ConfigError::Invalid("runs must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(ConfigError::Invalid("no algorithms selected".into()));
        }
        if self.metrics_every == 0 {
            return Err(ConfigError::Invalid("metrics_every must be at least 1".into()));
        }
        let mut seen = Vec::new();
        for a in &self.algorithms {
            if seen.contains(a) {
                return Err(ConfigError::Invalid(format!("algorithm {a} listed twice")));
            }
            seen.push(*a);
        }
        let HuangConfig {
            input_c,
            input_q,
            noise_q,
            ..
        } = self.huang;
        if !(input_c > 0.0 && input_c.is_finite() && input_q > 0.0 && input_q < 1.0 && noise_q > 0.0 && noise_q < 1.0) {
            return Err(ConfigError::Invalid(
                "huang needs input_c > 0 and input_q, noise_q in (0, 1)".into(),
            ));
        }
        if input_q >= noise_q {
            return Err(ConfigError::Invalid(format!(
                "huang input_q = {input_q} must be below noise_q = {noise_q} for a finite budget"
            )));
        }
        Ok(())
    }

    /// SHA-256 of the canonical TOML encoding.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = self.to_string(Format::Toml).unwrap_or_default();
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}
