//! Differentially private dynamic average consensus.
//!
//! Agents on a weighted undirected graph track the average of time-varying
//! reference signals while broadcasting Laplace-perturbed states. The crate
//! provides the update engine with two baselines, a privacy accountant with
//! noise calibration, schedule summability checks, and a seeded Monte-Carlo
//! harness that writes CSV artifacts.
//!
//! ```
//! use dpac::{step_proposed, ConsensusState, NoiseChannel, SignalEnsemble, SignalSpec, Topology};
//!
//! let topo = Topology::ring(3, 0.2).unwrap();
//! let signals = SignalEnsemble::new(
//!     [1.0, 2.0, 6.0].iter().map(|&v| SignalSpec::Constant { value: vec![v] }).collect(),
//! )
//! .unwrap();
//! let mut state = ConsensusState::initial(&signals).unwrap();
//! let mut noise = vec![NoiseChannel::zero(); 3];
//! for _ in 0..200 {
//!     state = step_proposed(&state, &topo, &signals, 0.0, 1.0, &mut noise).unwrap().0;
//! }
//! assert!(state.x.iter().all(|x| (x - 3.0).abs() < 1e-6));
//! ```

pub mod accountant;
pub mod cli;
pub mod config;
pub mod dp_noise;
pub mod engine;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod schedules;
pub mod signals;
pub mod topology;

pub use accountant::{calibrate_nu, epsilon_total, sensitivity_bound, PrivacyLedger, SeriesEstimate};
pub use config::ExperimentConfig;
pub use dp_noise::{NoiseChannel, StreamSeed};
pub use engine::{step, step_huang, step_proposed, step_zhu, AlgorithmKind, ConsensusState, UpdateCoefficients};
pub use harness::{prepare, run_experiment, validate, ValidationReport};
pub use metrics::{aggregate, diagnose_theorem1, Metric, RunRecord};
pub use schedules::{validate_assumption2, validate_theorem1, ScheduleSpec, Verdict};
pub use signals::{certify_drift, SignalEnsemble, SignalSpec};
pub use topology::{build_topology, contraction_norm, spectral_gap, Edge, Topology};
