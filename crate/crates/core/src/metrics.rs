//! Per-round error functionals, summability diagnostics, and Monte-Carlo
//! aggregation.
//!
//! With `x̄` the agent mean and `r̄` the reference mean at round `k`:
//!
//! - `consensus_error = Σ_i ‖x_i − x̄‖`
//! - `tracking_error  = Σ_i ‖x_i − r̄‖`
//! - `mean_gap        = ‖x̄ − r̄‖`
//! - `s1(K) = Σ_{k≤K} χ^k Σ_i ‖x_i − x̄‖²`
//! - `s2(K) = Σ_{k≤K} γ^k Σ_i ‖x_i − x̄‖`

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::engine::{mean_state, ConsensusState};

/// Growth ratio below which a diagnostic sum counts as flattened.
pub const GROWTH_THRESHOLD: f64 = 1.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("run {run} has a different round grid from run 0")]
    MismatchedGrids { run: usize },
    #[error("no runs to aggregate")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    ConsensusError,
    TrackingError,
    MeanGap,
    S1,
    S2,
}

impl Metric {
    pub const ALL: [Metric; 5] = [
        Self::ConsensusError,
        Self::TrackingError,
        Self::MeanGap,
        Self::S1,
        Self::S2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Self::ConsensusError => "consensus_error",
            Self::TrackingError => "tracking_error",
            Self::MeanGap => "mean_gap",
            Self::S1 => "s1",
            Self::S2 => "s2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RoundMetrics {
    pub k: u64,
    pub consensus_error: f64,
    pub tracking_error: f64,
    pub mean_gap: f64,
    pub s1: f64,
    pub s2: f64,
}

impl RoundMetrics {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::ConsensusError => self.consensus_error,
            Metric::TrackingError => self.tracking_error,
            Metric::MeanGap => self.mean_gap,
            Metric::S1 => self.s1,
            Metric::S2 => self.s2,
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// The error functionals of one state, without the running sums.
/// Returns `(consensus_error, Σ_i ‖x_i − x̄‖², tracking_error, mean_gap)`.
fn errors(state: &ConsensusState) -> (f64, f64, f64, f64) {
    let xbar = mean_state(state);
    let rbar = state.reference_mean();
    let mut consensus = 0.0;
    let mut consensus_sq = 0.0;
    let mut tracking = 0.0;
    for i in 0..state.agents() {
        let xi = state.agent(i);
        let spread = distance(xi, &xbar);
        consensus += spread;
        consensus_sq += spread * spread;
        tracking += distance(xi, &rbar);
    }
    (consensus, consensus_sq, tracking, distance(&xbar, &rbar))
}

/// Metrics of one run, one row per recorded round.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunRecord {
    pub rows: Vec<RoundMetrics>,
}

impl RunRecord {
    /// Appends round `state.k`, adding `χ^k`- and `γ^k`-weighted terms to the
    /// running sums.
    pub fn record_round(&mut self, state: &ConsensusState, chi: f64, gamma: f64) -> RoundMetrics {
        let (consensus_error, consensus_sq, tracking_error, mean_gap) = errors(state);
        let (s1, s2) = self.rows.last().map_or((0.0, 0.0), |r| (r.s1, r.s2));
        let row = RoundMetrics {
            k: state.k,
            consensus_error,
            tracking_error,
            mean_gap,
            s1: s1 + chi * consensus_sq,
            s2: s2 + gamma * consensus_error,
        };
        self.rows.push(row);
        row
    }

    pub fn at(&self, k: u64) -> Option<&RoundMetrics> {
        match self.rows.binary_search_by_key(&k, |r| r.k) {
            Ok(idx) => Some(&self.rows[idx]),
            Err(_) => None,
        }
    }

    /// Every `every`-th row plus the last one, for sparse output.
    pub fn decimated(&self, every: u64) -> RunRecord {
        let every = every.max(1);
        let last = self.rows.last().map(|r| r.k);
        RunRecord {
            rows: self
                .rows
                .iter()
                .filter(|r| r.k % every == 0 || Some(r.k) == last)
                .copied()
                .collect(),
        }
    }

    /// CSV with columns `k, consensus_error, tracking_error, mean_gap, s1, s2`.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["k"];
        header.extend(Metric::ALL.iter().map(Metric::name));
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.k.to_string()];
            rec.extend(Metric::ALL.iter().map(|m| format!("{:.16e}", row.get(*m))));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricStats {
    pub mean: f64,
    /// Sample variance; 0 for a single run.
    pub var: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
    pub q05: f64,
    pub q95: f64,
}

/// Linearly interpolated quantile of sorted data.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl MetricStats {
    pub fn from_samples(samples: &[f64]) -> MetricStats {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        MetricStats {
            mean,
            var,
            std: var.sqrt(),
            min: sorted[0],
            max: sorted[sorted.len() - 1],
            q05: quantile(&sorted, 0.05),
            q95: quantile(&sorted, 0.95),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleRow {
    pub k: u64,
    /// Indexed like [`Metric::ALL`].
    pub stats: [MetricStats; 5],
}

impl EnsembleRow {
    pub fn get(&self, metric: Metric) -> &MetricStats {
        &self.stats[Metric::ALL.iter().position(|m| *m == metric).expect("metric is listed")]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub runs: usize,
    pub rows: Vec<EnsembleRow>,
}

impl EnsembleSummary {
    pub fn at(&self, k: u64) -> Option<&EnsembleRow> {
        self.rows.iter().find(|r| r.k == k)
    }

    /// CSV with `k` then `<metric>_mean, _var, _q05, _q95` for each metric.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["k".to_owned()];
        for m in Metric::ALL {
            for stat in ["mean", "var", "q05", "q95"] {
                header.push(format!("{}_{stat}", m.name()));
            }
        }
        w.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![row.k.to_string()];
            for s in &row.stats {
                for v in [s.mean, s.var, s.q05, s.q95] {
                    rec.push(format!("{v:.16e}"));
                }
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Pointwise statistics across runs sharing one round grid.
pub fn aggregate(runs: &[RunRecord]) -> Result<EnsembleSummary, MetricsError> {
    let first = runs.first().ok_or(MetricsError::Empty)?;
    for (run, record) in runs.iter().enumerate() {
        let same = record.rows.len() == first.rows.len() && record.rows.iter().zip(&first.rows).all(|(a, b)| a.k == b.k);
        if !same {
            return Err(MetricsError::MismatchedGrids { run });
        }
    }
    let mut samples = vec![0.0; runs.len()];
    let rows = (0..first.rows.len())
        .map(|idx| {
            let stats = Metric::ALL.map(|metric| {
                for (s, record) in samples.iter_mut().zip(runs) {
                    *s = record.rows[idx].get(metric);
                }
                MetricStats::from_samples(&samples)
            });
            EnsembleRow {
                k: first.rows[idx].k,
                stats,
            }
        })
        .collect();
    Ok(EnsembleSummary {
        runs: runs.len(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticVerdict {
    ConsistentWithSummability,
    Inconsistent,
    InsufficientHorizon,
}

impl std::fmt::Display for DiagnosticVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::ConsistentWithSummability => "consistent with summability",
            Self::Inconsistent => "inconsistent",
            Self::InsufficientHorizon => "insufficient horizon",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummabilityDiagnosis {
    pub horizon: u64,
    pub s1: f64,
    pub s2: f64,
    /// `S1(K)/S1(K/2)`.
    pub s1_ratio: Option<f64>,
    /// `S2(K)/S2(K/2)`.
    pub s2_ratio: Option<f64>,
    pub verdict: DiagnosticVerdict,
}

fn growth(full: f64, half: f64) -> f64 {
    if half > 0.0 {
        full / half
    } else if full == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Growth of the diagnostic sums over the last doubling of the horizon.
pub fn diagnose_theorem1(record: &RunRecord, horizon: u64) -> SummabilityDiagnosis {
    let full = record.at(horizon);
    let half = record.at(horizon / 2);
    match (full, half) {
        (Some(full), Some(half)) if horizon >= 2 => {
            let s1_ratio = growth(full.s1, half.s1);
            let s2_ratio = growth(full.s2, half.s2);
            let verdict = if s1_ratio < GROWTH_THRESHOLD && s2_ratio < GROWTH_THRESHOLD {
                DiagnosticVerdict::ConsistentWithSummability
            } else {
                DiagnosticVerdict::Inconsistent
            };
            SummabilityDiagnosis {
                horizon,
                s1: full.s1,
                s2: full.s2,
                s1_ratio: Some(s1_ratio),
                s2_ratio: Some(s2_ratio),
                verdict,
            }
        }
        _ => SummabilityDiagnosis {
            horizon,
            s1: full.map_or(f64::NAN, |r| r.s1),
            s2: full.map_or(f64::NAN, |r| r.s2),
            s1_ratio: None,
            s2_ratio: None,
            verdict: DiagnosticVerdict::InsufficientHorizon,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_state(x: &[f64], r: &[f64]) -> ConsensusState {
        ConsensusState::from_parts(0, x.to_vec(), r.to_vec(), r.to_vec(), 1).unwrap()
    }

    #[test]
    fn converged_state_has_zero_error() {
        let mut rec = RunRecord::default();
        let row = rec.record_round(&scalar_state(&[2.0, 2.0], &[1.0, 3.0]), 1.0, 1.0);
        assert_eq!((row.consensus_error, row.tracking_error, row.mean_gap), (0.0, 0.0, 0.0));
    }

    #[test]
    fn two_agent_arithmetic() {
        let mut rec = RunRecord::default();
        let row = rec.record_round(&scalar_state(&[0.0, 2.0], &[1.0, 1.0]), 0.5, 0.25);
        assert_eq!(row.consensus_error, 2.0);
        assert_eq!(row.tracking_error, 2.0);
        assert_eq!(row.mean_gap, 0.0);
        assert_eq!(row.s1, 0.5 * 2.0);
        assert_eq!(row.s2, 0.25 * 2.0);
    }

    #[test]
    fn running_sums_accumulate() {
        let mut rec = RunRecord::default();
        let mut state = scalar_state(&[0.0, 4.0], &[0.0, 0.0]);
        rec.record_round(&state, 1.0, 1.0);
        state.k = 1;
        state.x = vec![1.0, 3.0];
        let row = rec.record_round(&state, 0.5, 0.5);
        // spreads: 2+2 then 1+1; squares 8 then 2.
        assert_eq!(row.s1, 8.0 + 0.5 * 2.0);
        assert_eq!(row.s2, 4.0 + 0.5 * 2.0);
    }

    #[test]
    fn multi_dimensional_norms() {
        let state = ConsensusState::from_parts(0, vec![3.0, 4.0, -3.0, -4.0], vec![0.0; 4], vec![0.0; 4], 2).unwrap();
        let row = RunRecord::default().record_round(&state, 1.0, 1.0);
        assert_eq!(row.consensus_error, 10.0);
        assert_eq!(row.tracking_error, 10.0);
    }

    fn record(values: &[(u64, f64)]) -> RunRecord {
        RunRecord {
            rows: values
                .iter()
                .map(|&(k, v)| RoundMetrics {
                    k,
                    consensus_error: v,
                    tracking_error: v,
                    mean_gap: v,
                    s1: v,
                    s2: v,
                })
                .collect(),
        }
    }

    #[test]
    fn single_run_has_zero_variance() {
        let s = aggregate(&[record(&[(0, 1.0), (1, 2.0)])]).unwrap();
        assert!(s.rows.iter().all(|r| r.stats.iter().all(|m| m.var == 0.0)));
        assert_eq!(s.rows[1].get(Metric::TrackingError).mean, 2.0);
    }

    #[test]
    fn identical_runs_have_zero_variance() {
        let r = record(&[(0, 1.5), (5, 0.5)]);
        let s = aggregate(&[r.clone(), r]).unwrap();
        assert!(s.rows.iter().all(|r| r.stats.iter().all(|m| m.var == 0.0)));
        assert_eq!(s.at(5).unwrap().get(Metric::S1).mean, 0.5);
    }

    #[test]
    fn quantiles_interpolate_linearly() {
        let values: Vec<f64> = (0..=10).map(f64::from).collect();
        let stats = MetricStats::from_samples(&values);
        assert!((stats.q05 - 0.5).abs() < 1e-12);
        assert!((stats.q95 - 9.5).abs() < 1e-12);
        assert_eq!((stats.min, stats.max, stats.mean), (0.0, 10.0, 5.0));
        assert!((stats.var - 11.0).abs() < 1e-12);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let err = aggregate(&[record(&[(0, 1.0), (1, 1.0)]), record(&[(0, 1.0), (2, 1.0)])]).unwrap_err();
        assert_eq!(err, MetricsError::MismatchedGrids { run: 1 });
        assert_eq!(aggregate(&[]).unwrap_err(), MetricsError::Empty);
    }

    #[test]
    fn diagnosis_verdicts() {
        let flat = record(&[(0, 1.0), (1, 2.0), (2, 2.01)]);
        assert_eq!(diagnose_theorem1(&flat, 2).verdict, DiagnosticVerdict::ConsistentWithSummability);
        let growing = record(&[(0, 1.0), (1, 2.0), (2, 4.0)]);
        let d = diagnose_theorem1(&growing, 2);
        assert_eq!(d.verdict, DiagnosticVerdict::Inconsistent);
        assert_eq!(d.s1_ratio, Some(2.0));
        assert_eq!(diagnose_theorem1(&flat, 1).verdict, DiagnosticVerdict::InsufficientHorizon);
        assert_eq!(diagnose_theorem1(&flat, 9).verdict, DiagnosticVerdict::InsufficientHorizon);
    }

    #[test]
    fn decimation_keeps_the_last_row() {
        let r = record(&[(0, 1.0), (1, 1.0), (2, 1.0), (3, 1.0)]);
        let ks: Vec<u64> = r.decimated(2).rows.iter().map(|r| r.k).collect();
        assert_eq!(ks, vec![0, 2, 3]);
    }

    #[test]
    fn csv_headers() {
        let mut buf = Vec::new();
        record(&[(0, 1.0)]).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,consensus_error,tracking_error,mean_gap,s1,s2\n0,1.0000000000000000e0,"));
        let mut buf = Vec::new();
        aggregate(&[record(&[(0, 1.0)])]).unwrap().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("k,consensus_error_mean,consensus_error_var,consensus_error_q05,consensus_error_q95,tracking_error_mean"));
    }
}
