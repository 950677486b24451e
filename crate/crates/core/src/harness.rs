//! Experiment orchestration: assumption checks, seeded Monte-Carlo runs,
//! budget accounting, and artifact output.
//!
//! Layout of `<output_dir>/<name>/`:
//!
//! ```text
//! config.toml               effective configuration
//! validation.txt            assumption report
//! signals.csv               k, r_<agent>_<coord>..., rbar_<coord>...
//! ledger.csv                proposed budget ledger up to the horizon
//! ledger_huang.csv          geometric baseline ledger (when selected)
//! runs/<algo>/run_NNNNN.csv per-run metrics
//! states/<algo>/run_NNNNN.csv  k, agent, coordinate, value (when dumping)
//! ensemble_<algo>.csv       cross-run statistics
//! diagnostics_<algo>.csv    per-run growth ratios of the diagnostic sums
//! manifest.json             config hash, seed rule, file checksums
//! ```
//!
//! Run `r` of every algorithm draws its noise from the streams keyed by
//! `(master_seed, r, agent)`, so algorithms see common random numbers and a
//! run's output never depends on how many runs are requested.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::accountant::{calibrate_nu, epsilon_total, AccountantError, PrivacyLedger, SeriesEstimate};
use crate::config::{ConfigError, ExperimentConfig, Format, NoiseConfig};
use crate::dp_noise::{channels_for_run, NoiseError};
use crate::engine::{step, AlgorithmKind, ConsensusState, EngineError, UpdateCoefficients};
use crate::metrics::{aggregate, diagnose_theorem1, EnsembleSummary, MetricsError, RunRecord, SummabilityDiagnosis};
use crate::schedules::{validate_assumption2, validate_theorem1, ScheduleError, ScheduleSpec, Verdict};
use crate::signals::{certify_drift, DriftCertificate, SignalEnsemble, SignalError};
use crate::topology::{contraction_norm, spectral_gap, Topology, TopologyError};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "DPAC_OUT_DIR";
const FALLBACK_OUT_DIR: &str = "dpac-out";
/// Points on the logarithmic grid of the contraction check.
pub const CONTRACTION_GRID_POINTS: usize = 100;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("assumption checks failed: {}", .0.failures().join(", "))]
    Validation(ValidationReport),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Accountant(#[from] AccountantError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub verdict: Verdict,
    /// Whether a failure blocks runs without an override.
    pub gating: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    fn push(&mut self, name: impl Into<String>, verdict: Verdict, gating: bool, detail: impl Into<String>) {
        self.checks.push(Check {
            name: name.into(),
            verdict,
            gating,
            detail: detail.into(),
        });
    }

    /// No gating check failed.
    pub fn passed(&self) -> bool {
        !self.checks.iter().any(|c| c.gating && c.verdict == Verdict::Fails)
    }

    pub fn failures(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| c.gating && c.verdict == Verdict::Fails)
            .map(|c| c.name.clone())
            .collect()
    }

    pub fn verdict(&self, name: &str) -> Option<Verdict> {
        self.checks.iter().find(|c| c.name == name).map(|c| c.verdict)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            let tag = format!("[{}]", c.verdict);
            let info = if c.gating { "" } else { " (info)" };
            writeln!(f, "{tag:<10}{}{info}: {}", c.name, c.detail)?;
        }
        let outcome = if self.passed() { "all required checks pass" } else { "guarantees void" };
        write!(f, "{outcome}")
    }
}

/// Geometric-baseline parameters after calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct HuangSetup {
    /// `input_c·input_q^k`, also the baseline's drift schedule.
    pub input: ScheduleSpec,
    pub nu: Option<ScheduleSpec>,
    pub c_bar: f64,
}

/// A configuration with every derived object built and checked.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ExperimentConfig,
    pub topology: Topology,
    pub signals: SignalEnsemble,
    pub certificate: DriftCertificate,
    /// Sensitivity constant used by the accountant.
    pub c_bar: f64,
    /// Noise scale shared by the proposed algorithm and the Zhu baseline.
    pub nu: Option<ScheduleSpec>,
    /// Infinite-horizon budget of the proposed algorithm.
    pub epsilon: Option<SeriesEstimate>,
    pub huang: Option<HuangSetup>,
    pub contraction_onset: Option<u64>,
    pub report: ValidationReport,
}

impl Prepared {
    pub fn alpha(&self) -> &ScheduleSpec {
        &self.config.schedules.alpha
    }
    pub fn chi(&self) -> &ScheduleSpec {
        &self.config.schedules.chi
    }
    pub fn gamma(&self) -> &ScheduleSpec {
        &self.config.schedules.gamma
    }

    /// Budget ledger of the proposed algorithm up to `horizon`.
    pub fn ledger(&self, horizon: u64) -> Result<Option<PrivacyLedger>, HarnessError> {
        match &self.nu {
            None => Ok(None),
            Some(nu) => Ok(Some(
                PrivacyLedger::new(self.gamma().clone(), nu.clone(), self.c_bar)?.accumulate(horizon)?,
            )),
        }
    }

    pub fn huang_ledger(&self, horizon: u64) -> Result<Option<PrivacyLedger>, HarnessError> {
        match &self.huang {
            Some(HuangSetup {
                input,
                nu: Some(nu),
                c_bar,
            }) => Ok(Some(PrivacyLedger::new(input.clone(), nu.clone(), *c_bar)?.accumulate(horizon)?)),
            _ => Ok(None),
        }
    }
}

/// `points` strictly increasing integers spaced logarithmically over
/// `[lo, hi]`, or every integer in the range when it is shorter.
pub fn log_grid(lo: u64, hi: u64, points: usize) -> Vec<u64> {
    let lo = lo.max(1);
    if hi <= lo || points < 2 {
        return vec![lo.max(hi)];
    }
    if hi - lo < points as u64 {
        return (lo..=hi).collect();
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut grid: Vec<u64> = (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1) as f64).exp().round() as u64)
        .collect();
    grid[0] = lo;
    // Rounding collides near `lo`; push duplicates up by one.
    for i in 1..points {
        grid[i] = grid[i].max(grid[i - 1] + 1);
    }
    grid[points - 1] = hi;
    grid
}

/// Smallest grid point `T` such that `‖W^k‖ < 1 − χ^k|ρ₂|` at every grid
/// point `k ≥ T`; `None` if it fails at the last point.
pub fn contraction_onset(
    topology: &Topology,
    alpha: &ScheduleSpec,
    chi: &ScheduleSpec,
    grid: &[u64],
) -> Result<Option<u64>, HarnessError> {
    let gap = spectral_gap(topology);
    let mut onset = None;
    for &k in grid.iter().rev() {
        let c = chi.eval(k)?;
        if contraction_norm(topology, alpha.eval(k)?, c)? < 1.0 - c * gap {
            onset = Some(k);
        } else {
            break;
        }
    }
    Ok(onset)
}

fn schedule_check(report: &mut ValidationReport, name: &str, spec: &ScheduleSpec) -> bool {
    match spec.validate() {
        Ok(()) => true,
        Err(e) => {
            report.push(format!("{name} schedule"), Verdict::Fails, true, e.to_string());
            false
        }
    }
}

/// Builds every derived object and runs the assumption checks. Errors that
/// leave nothing to simulate come back as [`HarnessError::Validation`].
pub fn prepare(config: &ExperimentConfig) -> Result<Prepared, HarnessError> {
    config.check()?;
    let mut report = ValidationReport::default();
    let fail = |report: ValidationReport| Err(HarnessError::Validation(report));

    let topology = match config.topology.build() {
        Ok(t) => {
            let detail = if t.agents() > 1 {
                format!("rho_2 = {:.8}, rho_m = {:.8}", t.rho(2), t.rho(t.agents()))
            } else {
                "single agent".to_owned()
            };
            report.push("graph connected", Verdict::Holds, true, detail);
            report.push(
                "spectral condition ||I + L - 11'/m|| < 1",
                Verdict::Holds,
                true,
                format!("norm = {:.8}", t.assumption_norm()),
            );
            t
        }
        Err(e) => {
            let name = match e {
                TopologyError::DisconnectedGraph { .. } => "graph connected",
                TopologyError::SpectralConditionViolated { .. } => "spectral condition ||I + L - 11'/m|| < 1",
                _ => "graph weights valid",
            };
            report.push(name, Verdict::Fails, true, e.to_string());
            return fail(report);
        }
    };

    let signals = match config.signals.build(topology.agents()) {
        Ok(s) => s,
        Err(e) => {
            report.push("signals valid", Verdict::Fails, true, e.to_string());
            return fail(report);
        }
    };

    let schedules = &config.schedules;
    let mut schedules_ok = schedule_check(&mut report, "alpha", &schedules.alpha);
    schedules_ok &= schedule_check(&mut report, "chi", &schedules.chi);
    schedules_ok &= schedule_check(&mut report, "gamma", &schedules.gamma);
    if !schedules_ok {
        return fail(report);
    }
    for c in validate_theorem1(&schedules.alpha, &schedules.chi, &schedules.gamma).conditions {
        report.push(c.kind.to_string(), c.verdict, true, c.detail);
    }

    let certify_to = config.certify_horizon.max(config.horizon);
    let certificate = match certify_drift(&signals, &schedules.alpha, &schedules.gamma, certify_to) {
        Ok(cert) => {
            report.push(
                "reference drift <= gamma^k C",
                Verdict::Holds,
                true,
                format!("C = {:.6e}, C_bar = {:.6e}, checked to k = {certify_to}", cert.c, cert.c_bar()),
            );
            cert
        }
        Err(e) => {
            report.push("reference drift <= gamma^k C", Verdict::Fails, true, e.to_string());
            return fail(report);
        }
    };
    let c_bar = config.privacy.c_bar.unwrap_or_else(|| certificate.c_bar());

    let nu = match &config.noise {
        NoiseConfig::Off => None,
        NoiseConfig::Explicit { nu } => {
            if !schedule_check(&mut report, "nu", nu) {
                return fail(report);
            }
            Some(nu.clone())
        }
        NoiseConfig::Calibrated { target_epsilon, shape } => {
            match calibrate_nu(*target_epsilon, &schedules.gamma, shape, c_bar) {
                Ok(nu) => {
                    report.push(
                        "noise calibration",
                        Verdict::Holds,
                        true,
                        format!("nu^k = {nu} for epsilon = {target_epsilon}"),
                    );
                    Some(nu)
                }
                Err(e) => {
                    report.push("noise calibration", Verdict::Fails, true, e.to_string());
                    return fail(report);
                }
            }
        }
    };

    let mut epsilon = None;
    if let Some(nu) = &nu {
        let sigma = nu.scaled(std::f64::consts::SQRT_2)?;
        for c in validate_assumption2(&schedules.chi, &sigma).conditions {
            report.push(c.kind.to_string(), c.verdict, true, c.detail);
        }
        match epsilon_total(&schedules.gamma, nu, c_bar) {
            Ok(est) => {
                report.push(
                    "privacy budget bounded",
                    Verdict::Holds,
                    false,
                    format!("epsilon <= {:.6} (in [{:.6}, {:.6}])", est.value(), est.lower(), est.upper()),
                );
                epsilon = Some(est);
            }
            Err(AccountantError::DivergentShapeRatio(d)) => {
                report.push("privacy budget bounded", Verdict::Fails, false, d);
            }
            Err(e) => report.push("privacy budget bounded", Verdict::Unknown, false, e.to_string()),
        }
    }

    let grid = log_grid(1, certify_to, CONTRACTION_GRID_POINTS);
    let onset = contraction_onset(&topology, &schedules.alpha, &schedules.chi, &grid)?;
    match onset {
        Some(t) => report.push(
            "||W^k|| < 1 - chi^k |rho_2| eventually",
            Verdict::Holds,
            false,
            format!("holds on the log grid from k = {t} to {certify_to}"),
        ),
        None => report.push(
            "||W^k|| < 1 - chi^k |rho_2| eventually",
            Verdict::Fails,
            false,
            format!("fails at k = {certify_to}"),
        ),
    }

    let huang = if config.algorithms.contains(&AlgorithmKind::Huang) {
        let h = &config.huang;
        let input = ScheduleSpec::geometric(h.input_c, h.input_q)?;
        let c_bar_h = h.c_bar.unwrap_or_else(|| {
            let increment_bound = (signals.dim() as f64).sqrt() * certificate.max_increment;
            c_bar.max(increment_bound)
        });
        let nu_h = match (&nu, &epsilon) {
            (None, _) => None,
            (Some(_), Some(eps)) => {
                let shape = ScheduleSpec::geometric(1.0, h.noise_q)?;
                match calibrate_nu(eps.value(), &input, &shape, c_bar_h) {
                    Ok(nu_h) => {
                        report.push(
                            "geometric baseline calibration",
                            Verdict::Holds,
                            true,
                            format!("nu^k = {nu_h}, C_bar = {c_bar_h:.6e}, epsilon = {:.6}", eps.value()),
                        );
                        Some(nu_h)
                    }
                    Err(e) => {
                        report.push("geometric baseline calibration", Verdict::Fails, true, e.to_string());
                        return fail(report);
                    }
                }
            }
            (Some(_), None) => {
                report.push(
                    "geometric baseline calibration",
                    Verdict::Fails,
                    true,
                    "the proposed algorithm has no finite budget to match",
                );
                return fail(report);
            }
        };
        Some(HuangSetup {
            input,
            nu: nu_h,
            c_bar: c_bar_h,
        })
    } else {
        None
    };

    Ok(Prepared {
        config: config.clone(),
        topology,
        signals,
        certificate,
        c_bar,
        nu,
        epsilon,
        huang,
        contraction_onset: onset,
        report,
    })
}

/// The assumption report alone; build failures appear as failed checks.
pub fn validate(config: &ExperimentConfig) -> ValidationReport {
    match prepare(config) {
        Ok(p) => p.report,
        Err(HarnessError::Validation(report)) => report,
        Err(e) => {
            let mut report = ValidationReport::default();
            report.push("configuration", Verdict::Fails, true, e.to_string());
            report
        }
    }
}

/// One simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub run: u64,
    /// Every round `0..=horizon`.
    pub record: RunRecord,
    /// `(k, agent, coordinate, value)`, 0-based.
    pub states: Vec<(u64, usize, usize, f64)>,
}

/// Simulates run `run` of `algorithm` over the configured horizon.
pub fn simulate_run(prepared: &Prepared, algorithm: AlgorithmKind, run: u64) -> Result<RunOutput, HarnessError> {
    let config = &prepared.config;
    let m = prepared.topology.agents();
    let nu = match algorithm {
        AlgorithmKind::Proposed | AlgorithmKind::Zhu => prepared.nu.as_ref(),
        AlgorithmKind::Huang => prepared.huang.as_ref().and_then(|h| h.nu.as_ref()),
    };
    let mut channels = channels_for_run(nu, config.master_seed, run, m)?;
    let huang_input = prepared.huang.as_ref().map(|h| &h.input);

    let mut state = ConsensusState::initial(&prepared.signals)?;
    let mut record = RunRecord::default();
    let mut states = Vec::new();
    for k in 0..=config.horizon {
        let (coeffs, chi_diag) = match algorithm {
            AlgorithmKind::Proposed => {
                let chi = prepared.chi().eval(k)?;
                let coeffs = UpdateCoefficients {
                    alpha: prepared.alpha().eval(k)?,
                    chi,
                    input_weight: 1.0,
                };
                (coeffs, chi)
            }
            AlgorithmKind::Zhu => (
                UpdateCoefficients {
                    alpha: 0.0,
                    chi: 1.0,
                    input_weight: 1.0,
                },
                1.0,
            ),
            AlgorithmKind::Huang => {
                let input = huang_input.expect("huang setup is prepared when selected");
                (
                    UpdateCoefficients {
                        alpha: 0.0,
                        chi: 1.0,
                        input_weight: input.eval(k)?,
                    },
                    1.0,
                )
            }
        };
        record.record_round(&state, chi_diag, prepared.gamma().eval(k)?);
        if config.dump_every > 0 && k % config.dump_every == 0 {
            for i in 0..m {
                for (l, v) in state.agent(i).iter().enumerate() {
                    states.push((k, i, l, *v));
                }
            }
        }
        if k == config.horizon {
            break;
        }
        state = step(&state, &prepared.topology, &prepared.signals, coeffs, &mut channels)?.0;
    }
    Ok(RunOutput { run, record, states })
}

/// Results of one algorithm across all runs.
#[derive(Debug, Clone)]
pub struct AlgorithmResult {
    pub algorithm: AlgorithmKind,
    pub ensemble: EnsembleSummary,
    pub diagnostics: Vec<SummabilityDiagnosis>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub name: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub seed_rule: String,
    pub runs: u64,
    pub horizon: u64,
    pub algorithms: Vec<AlgorithmKind>,
    pub c_bar: f64,
    pub epsilon: Option<f64>,
    pub created_unix: u64,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub results: Vec<AlgorithmResult>,
    pub report: ValidationReport,
}

impl ExperimentOutput {
    pub fn result(&self, algorithm: AlgorithmKind) -> Option<&AlgorithmResult> {
        self.results.iter().find(|r| r.algorithm == algorithm)
    }
}

/// Output root: the config's `output_dir`, else `$DPAC_OUT_DIR`, else `dpac-out`.
pub fn output_root(config: &ExperimentConfig) -> PathBuf {
    config
        .output_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(FALLBACK_OUT_DIR))
}

fn create_file(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_error(parent))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_error(path))?))
}

fn write_text(path: &Path, text: &str) -> Result<(), HarnessError> {
    let mut w = create_file(path)?;
    w.write_all(text.as_bytes()).map_err(io_error(path))?;
    w.flush().map_err(io_error(path))
}

fn write_signals(path: &Path, signals: &SignalEnsemble, horizon: u64, every: u64) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let (m, d) = (signals.agents(), signals.dim());
    let mut header = vec!["k".to_owned()];
    for i in 1..=m {
        for l in 1..=d {
            header.push(format!("r_{i}_{l}"));
        }
    }
    header.extend((1..=d).map(|l| format!("rbar_{l}")));
    w.write_record(&header)?;
    for k in (0..=horizon).filter(|k| k % every == 0 || *k == horizon) {
        let mut rec = vec![k.to_string()];
        rec.extend(signals.sample_all(k)?.iter().map(|v| format!("{v:.16e}")));
        rec.extend(signals.average(k)?.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_error(path))
}

fn write_states(path: &Path, states: &[(u64, usize, usize, f64)]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    w.write_record(["k", "agent", "coordinate", "value"])?;
    for (k, i, l, v) in states {
        w.write_record([k.to_string(), (i + 1).to_string(), (l + 1).to_string(), format!("{v:.16e}")])?;
    }
    w.flush().map_err(io_error(path))
}

fn write_diagnostics(path: &Path, diagnostics: &[SummabilityDiagnosis]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    w.write_record(["run", "s1", "s2", "s1_ratio", "s2_ratio", "verdict"])?;
    let ratio = |r: Option<f64>| r.map_or(String::new(), |v| format!("{v:.16e}"));
    for (run, d) in diagnostics.iter().enumerate() {
        w.write_record([
            run.to_string(),
            format!("{:.16e}", d.s1),
            format!("{:.16e}", d.s2),
            ratio(d.s1_ratio),
            ratio(d.s2_ratio),
            d.verdict.to_string(),
        ])?;
    }
    w.flush().map_err(io_error(path))
}

fn file_entry(root: &Path, path: &Path) -> Result<FileEntry, HarnessError> {
    let bytes = fs::read(path).map_err(io_error(path))?;
    let relative = path.strip_prefix(root).unwrap_or(path);
    Ok(FileEntry {
        path: relative.to_string_lossy().replace('\\', "/"),
        bytes: bytes.len() as u64,
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn run_algorithm(
    prepared: &Prepared,
    algorithm: AlgorithmKind,
    dir: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<AlgorithmResult, HarnessError> {
    let config = &prepared.config;
    let name = algorithm.name();
    let outputs: Vec<(PathBuf, Option<PathBuf>, RunRecord, SummabilityDiagnosis)> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let out = simulate_run(prepared, algorithm, run)?;
            let diagnosis = diagnose_theorem1(&out.record, config.horizon);
            let record = out.record.decimated(config.metrics_every);
            let run_path = dir.join("runs").join(name).join(format!("run_{run:05}.csv"));
            record.write_csv(create_file(&run_path)?)?;
            let state_path = if config.dump_every > 0 {
                let p = dir.join("states").join(name).join(format!("run_{run:05}.csv"));
                write_states(&p, &out.states)?;
                Some(p)
            } else {
                None
            };
            Ok((run_path, state_path, record, diagnosis))
        })
        .collect::<Result<_, HarnessError>>()?;

    let mut records = Vec::with_capacity(outputs.len());
    let mut diagnostics = Vec::with_capacity(outputs.len());
    for (run_path, state_path, record, diagnosis) in outputs {
        written.push(run_path);
        written.extend(state_path);
        records.push(record);
        diagnostics.push(diagnosis);
    }
    let ensemble = aggregate(&records)?;
    let ensemble_path = dir.join(format!("ensemble_{name}.csv"));
    ensemble.write_csv(create_file(&ensemble_path)?)?;
    written.push(ensemble_path);
    let diag_path = dir.join(format!("diagnostics_{name}.csv"));
    write_diagnostics(&diag_path, &diagnostics)?;
    written.push(diag_path);
    Ok(AlgorithmResult {
        algorithm,
        ensemble,
        diagnostics,
    })
}

/// Validates, simulates every selected algorithm, and writes all artifacts.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    let prepared = prepare(config)?;
    if !prepared.report.passed() && !config.override_assumptions {
        return Err(HarnessError::Validation(prepared.report));
    }
    let dir = output_root(config).join(&config.name);
    fs::create_dir_all(&dir).map_err(io_error(&dir))?;

    let mut written = Vec::new();
    let config_path = dir.join("config.toml");
    write_text(&config_path, &config.to_string(Format::Toml).map_err(ConfigError::Invalid)?)?;
    written.push(config_path);
    let report_path = dir.join("validation.txt");
    write_text(&report_path, &format!("{}\n", prepared.report))?;
    written.push(report_path);
    let signals_path = dir.join("signals.csv");
    write_signals(&signals_path, &prepared.signals, config.horizon, config.metrics_every)?;
    written.push(signals_path);
    if let Some(ledger) = prepared.ledger(config.horizon)? {
        let path = dir.join("ledger.csv");
        ledger.write_csv(create_file(&path)?)?;
        written.push(path);
    }
    if config.algorithms.contains(&AlgorithmKind::Huang) {
        if let Some(ledger) = prepared.huang_ledger(config.horizon)? {
            let path = dir.join("ledger_huang.csv");
            ledger.write_csv(create_file(&path)?)?;
            written.push(path);
        }
    }

    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(workers) = config.workers {
        builder = builder.num_threads(workers);
    }
    let pool = builder.build().map_err(|e| HarnessError::Pool(e.to_string()))?;
    let results = config
        .algorithms
        .iter()
        .map(|&algorithm| pool.install(|| run_algorithm(&prepared, algorithm, &dir, &mut written)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut files = written.iter().map(|p| file_entry(&dir, p)).collect::<Result<Vec<_>, _>>()?;
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let manifest = Manifest {
        name: config.name.clone(),
        config_sha256: config.digest(),
        master_seed: config.master_seed,
        seed_rule: "noise stream of (run r, agent i) is ChaCha8 keyed by \
                    master_seed_le || r_le || i_le || \"dpacnois\" (64-bit little-endian); \
                    identical across algorithms"
            .to_owned(),
        runs: config.runs,
        horizon: config.horizon,
        algorithms: config.algorithms.clone(),
        c_bar: prepared.c_bar,
        epsilon: prepared.epsilon.map(|e| e.value()),
        created_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        files,
    };
    let manifest_path = dir.join("manifest.json");
    write_text(&manifest_path, &serde_json::to_string_pretty(&manifest)?)?;

    Ok(ExperimentOutput {
        dir,
        manifest,
        results,
        report: prepared.report,
    })
}
