//! Privacy budget accounting for Laplace-perturbed consensus.
//!
//! Round `k` has sensitivity at most `Δ^k = 2·C̄·γ^k` and spends at most
//! `Δ^k/ν^k`. The ledger sums these from `k = 1`. Its totals are upper bounds
//! on the privacy loss, not exact values.
//!
//! Infinite sums are a partial sum plus a rigorous tail interval from the
//! schedules' envelopes; point estimates use the interval midpoint.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::schedules::{validate_assumption2, ScheduleError, ScheduleSpec, SeriesVerdict};

/// Largest partial-sum index for series constants such as `Σ γ^k/ν'^k`.
pub const PHI_HORIZON: u64 = 10_000_000;

/// Partial sums stop early once the tail interval is this narrow, relative
/// to the running total.
const TAIL_WIDTH_TOLERANCE: f64 = 1e-13;
const TAIL_CHECK_STRIDE: u64 = 1024;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AccountantError {
    #[error("the ratio gamma^k/nu^k is not summable ({0})")]
    DivergentShapeRatio(String),
    #[error("cannot decide summability of gamma^k/nu^k ({0})")]
    Undecidable(String),
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),
    #[error("calibrated noise violates the noise-variance condition: {0}")]
    NoiseConditionViolated(String),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// `2·γ^k·C̄`.
pub fn sensitivity_bound(k: u64, gamma: &ScheduleSpec, c_bar: f64) -> Result<f64, AccountantError> {
    check_c_bar(c_bar)?;
    Ok(2.0 * gamma.eval(k)? * c_bar)
}

fn check_c_bar(c_bar: f64) -> Result<(), AccountantError> {
    if c_bar.is_finite() && c_bar >= 0.0 {
        Ok(())
    } else {
        Err(AccountantError::ParameterOutOfRange(format!("C_bar = {c_bar} must be finite and nonnegative")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TailBound {
    Bounded { lower: f64, upper: f64 },
    Unbounded,
    Unknown,
}

impl std::fmt::Display for TailBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Bounded { upper, .. } => write!(f, "{upper:.16e}"),
            Self::Unbounded => f.write_str("unbounded"),
            Self::Unknown => f.write_str("unknown"),
        }
    }
}

/// Bounds on `Σ_{k > after} γ^k/ν^k`.
fn ratio_tail(gamma: &ScheduleSpec, nu: &ScheduleSpec, after: u64) -> Result<TailBound, AccountantError> {
    let from = after.max(1);
    let envelope = match (gamma.envelope(from), nu.envelope(from)) {
        (Some(g), Some(n)) => g.quotient(n),
        _ => None,
    };
    let Some(envelope) = envelope else {
        return Ok(TailBound::Unknown);
    };
    Ok(match envelope.series_verdict() {
        SeriesVerdict::Diverges => TailBound::Unbounded,
        SeriesVerdict::Unknown => TailBound::Unknown,
        SeriesVerdict::Converges => match envelope.tail_bounds() {
            None => TailBound::Unknown,
            Some((lower, upper)) => {
                // The envelope starts at k = 1, so k = 1 itself is added exactly.
                let head = if after == 0 { ratio_term(gamma, nu, 1)? } else { 0.0 };
                TailBound::Bounded {
                    lower: lower + head,
                    upper: upper + head,
                }
            }
        },
    })
}

fn ratio_term(gamma: &ScheduleSpec, nu: &ScheduleSpec, k: u64) -> Result<f64, AccountantError> {
    let g = gamma.eval(k)?;
    if g == 0.0 {
        return Ok(0.0);
    }
    let n = nu.eval(k)?;
    if n.is_nan() || n <= 0.0 {
        return Err(AccountantError::ParameterOutOfRange(format!("nu^{k} = {n} is not positive")));
    }
    Ok(g / n)
}

/// `Σ_{k≥1} a^k` as a partial sum over `1..=terms` plus a tail interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesEstimate {
    pub partial: f64,
    pub terms: u64,
    pub tail_lower: f64,
    pub tail_upper: f64,
}

impl SeriesEstimate {
    pub fn value(&self) -> f64 {
        self.partial + 0.5 * (self.tail_lower + self.tail_upper)
    }

    pub fn lower(&self) -> f64 {
        self.partial + self.tail_lower
    }

    pub fn upper(&self) -> f64 {
        self.partial + self.tail_upper
    }

    pub fn scaled(&self, factor: f64) -> SeriesEstimate {
        SeriesEstimate {
            partial: self.partial * factor,
            terms: self.terms,
            tail_lower: self.tail_lower * factor,
            tail_upper: self.tail_upper * factor,
        }
    }
}

/// `Φ_{γ,ν} = Σ_{k≥1} γ^k/ν^k`, summed up to `horizon` terms or until the
/// tail interval is negligible.
pub fn ratio_series(gamma: &ScheduleSpec, nu: &ScheduleSpec, horizon: u64) -> Result<SeriesEstimate, AccountantError> {
    let describe = || format!("gamma = {gamma}, nu = {nu}");
    match ratio_tail(gamma, nu, 0)? {
        TailBound::Unbounded => return Err(AccountantError::DivergentShapeRatio(describe())),
        TailBound::Unknown => return Err(AccountantError::Undecidable(describe())),
        TailBound::Bounded { .. } => {}
    }
    let mut partial = 0.0;
    let mut k = 0;
    while k < horizon {
        k += 1;
        partial += ratio_term(gamma, nu, k)?;
        if k % TAIL_CHECK_STRIDE == 0 || k == horizon {
            if let TailBound::Bounded { lower, upper } = ratio_tail(gamma, nu, k)? {
                if upper - lower <= TAIL_WIDTH_TOLERANCE * partial {
                    break;
                }
            }
        }
    }
    match ratio_tail(gamma, nu, k)? {
        TailBound::Bounded { lower, upper } => Ok(SeriesEstimate {
            partial,
            terms: k,
            tail_lower: lower,
            tail_upper: upper,
        }),
        _ => Err(AccountantError::Undecidable(describe())),
    }
}

/// Total budget `Σ_{k≥1} 2·C̄·γ^k/ν^k`.
pub fn epsilon_total(gamma: &ScheduleSpec, nu: &ScheduleSpec, c_bar: f64) -> Result<SeriesEstimate, AccountantError> {
    check_c_bar(c_bar)?;
    Ok(ratio_series(gamma, nu, PHI_HORIZON)?.scaled(2.0 * c_bar))
}

/// `ν^k = (2·C̄·Φ_{γ,ν'}/ε)·ν'^k`, whose total budget is `ε`.
pub fn calibrate_nu(
    target_eps: f64,
    gamma: &ScheduleSpec,
    nu_shape: &ScheduleSpec,
    c_bar: f64,
) -> Result<ScheduleSpec, AccountantError> {
    if !(target_eps.is_finite() && target_eps > 0.0) {
        return Err(AccountantError::ParameterOutOfRange(format!("target epsilon {target_eps} must be positive")));
    }
    check_c_bar(c_bar)?;
    if c_bar == 0.0 {
        return Err(AccountantError::ParameterOutOfRange(
            "C_bar = 0 needs no noise; calibration is undefined".into(),
        ));
    }
    let phi = ratio_series(gamma, nu_shape, PHI_HORIZON)?.value();
    Ok(nu_shape.scaled(2.0 * c_bar * phi / target_eps)?)
}

/// [`calibrate_nu`], then re-checks `Σ (χ^k)²·2(ν^k)² < ∞` for the result.
pub fn calibrate_nu_checked(
    target_eps: f64,
    gamma: &ScheduleSpec,
    nu_shape: &ScheduleSpec,
    c_bar: f64,
    chi: &ScheduleSpec,
) -> Result<ScheduleSpec, AccountantError> {
    let nu = calibrate_nu(target_eps, gamma, nu_shape, c_bar)?;
    let report = validate_assumption2(chi, &nu.scaled(std::f64::consts::SQRT_2)?);
    if !report.all_hold() {
        let detail = report.conditions.iter().map(|c| c.detail.clone()).collect::<Vec<_>>().join("; ");
        return Err(AccountantError::NoiseConditionViolated(detail));
    }
    Ok(nu)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LedgerEntry {
    pub k: u64,
    pub delta: f64,
    pub nu: f64,
    pub increment: f64,
    pub epsilon_cum: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrivacyLedger {
    gamma: ScheduleSpec,
    nu: ScheduleSpec,
    c_bar: f64,
    pub entries: Vec<LedgerEntry>,
    /// Bounds on the budget spent after the last entry.
    pub tail: TailBound,
}

impl PrivacyLedger {
    pub fn new(gamma: ScheduleSpec, nu: ScheduleSpec, c_bar: f64) -> Result<Self, AccountantError> {
        check_c_bar(c_bar)?;
        let tail = scaled_tail(ratio_tail(&gamma, &nu, 0)?, 2.0 * c_bar);
        Ok(Self {
            gamma,
            nu,
            c_bar,
            entries: Vec::new(),
            tail,
        })
    }

    pub fn c_bar(&self) -> f64 {
        self.c_bar
    }

    /// Entries for `k = 1..=up_to`.
    pub fn accumulate(&self, up_to: u64) -> Result<PrivacyLedger, AccountantError> {
        let mut entries = Vec::with_capacity(up_to as usize);
        let mut cum = 0.0;
        for k in 1..=up_to {
            let delta = sensitivity_bound(k, &self.gamma, self.c_bar)?;
            let nu = self.nu.eval(k)?;
            let increment = if delta == 0.0 { 0.0 } else { delta / nu };
            if !(increment.is_finite() && increment >= 0.0) {
                return Err(AccountantError::ParameterOutOfRange(format!("nu^{k} = {nu} is not positive")));
            }
            cum += increment;
            entries.push(LedgerEntry {
                k,
                delta,
                nu,
                increment,
                epsilon_cum: cum,
            });
        }
        Ok(PrivacyLedger {
            gamma: self.gamma.clone(),
            nu: self.nu.clone(),
            c_bar: self.c_bar,
            entries,
            tail: scaled_tail(ratio_tail(&self.gamma, &self.nu, up_to)?, 2.0 * self.c_bar),
        })
    }

    pub fn epsilon_cum(&self) -> f64 {
        self.entries.last().map_or(0.0, |e| e.epsilon_cum)
    }

    /// `(lower, upper)` on the infinite-horizon budget, when the tail is bounded.
    pub fn epsilon_total_bounds(&self) -> Option<(f64, f64)> {
        match self.tail {
            TailBound::Bounded { lower, upper } => Some((self.epsilon_cum() + lower, self.epsilon_cum() + upper)),
            _ => None,
        }
    }

    /// CSV with columns `k, delta_k, nu_k, increment, epsilon_cum, tail_bound`.
    /// Only the last row carries the tail bound; earlier rows leave it empty.
    pub fn write_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "delta_k", "nu_k", "increment", "epsilon_cum", "tail_bound"])?;
        let last = self.entries.len().saturating_sub(1);
        for (idx, e) in self.entries.iter().enumerate() {
            let tail = if idx == last { self.tail.to_string() } else { String::new() };
            w.write_record([
                e.k.to_string(),
                format!("{:.16e}", e.delta),
                format!("{:.16e}", e.nu),
                format!("{:.16e}", e.increment),
                format!("{:.16e}", e.epsilon_cum),
                tail,
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn scaled_tail(tail: TailBound, factor: f64) -> TailBound {
    match tail {
        _ if factor == 0.0 => TailBound::Bounded { lower: 0.0, upper: 0.0 },
        TailBound::Bounded { lower, upper } => TailBound::Bounded {
            lower: lower * factor,
            upper: upper * factor,
        },
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inv_k() -> ScheduleSpec {
        ScheduleSpec::monomial(1.0, -1.0).unwrap()
    }
    fn k_03() -> ScheduleSpec {
        ScheduleSpec::monomial(1.0, 0.3).unwrap()
    }

    #[test]
    fn sensitivity_examples() {
        let gamma = ScheduleSpec::power_law_lagged(1.0, 1.0).unwrap();
        assert!((sensitivity_bound(0, &gamma, 0.03).unwrap() - 0.06).abs() < 1e-15);
        assert_eq!(sensitivity_bound(7, &gamma, 0.0).unwrap(), 0.0);
        assert!(sensitivity_bound(0, &gamma, -1.0).is_err());
    }

    #[test]
    fn phi_for_the_k13_series() {
        let phi = ratio_series(&inv_k(), &k_03(), PHI_HORIZON).unwrap();
        assert_eq!(phi.terms, PHI_HORIZON);
        // ζ(1.3) = 3.93194...
        assert!((phi.value() - 3.931949).abs() < 1e-5, "{phi:?}");
        assert!(phi.tail_upper - phi.tail_lower < 1e-7);
    }

    #[test]
    fn geometric_ratios_stop_early_and_exactly() {
        let gamma = ScheduleSpec::geometric(1.0, 0.5).unwrap();
        let nu = ScheduleSpec::constant(1.0).unwrap();
        let s = ratio_series(&gamma, &nu, PHI_HORIZON).unwrap();
        assert!(s.terms < PHI_HORIZON);
        assert!((s.value() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn divergent_ratio_is_reported() {
        let gamma = ScheduleSpec::power_law(1.0, 1.0).unwrap();
        assert!(matches!(
            calibrate_nu(1.0, &gamma, &gamma, 1.0),
            Err(AccountantError::DivergentShapeRatio(_))
        ));
        let ledger = PrivacyLedger::new(gamma.clone(), gamma, 1.0).unwrap().accumulate(10).unwrap();
        assert_eq!(ledger.tail, TailBound::Unbounded);
        assert!((ledger.epsilon_cum() - 20.0).abs() < 1e-12);
    }

    #[test]
    fn empty_ledger() {
        let ledger = PrivacyLedger::new(inv_k(), k_03(), 0.5).unwrap().accumulate(0).unwrap();
        assert_eq!(ledger.epsilon_cum(), 0.0);
        let (lo, hi) = ledger.epsilon_total_bounds().unwrap();
        assert!(lo <= 3.932 && 3.931 <= hi);
    }

    #[test]
    fn ledger_prefix_plus_tail_brackets_the_total() {
        let ledger = PrivacyLedger::new(inv_k(), k_03(), 0.5).unwrap().accumulate(10_000).unwrap();
        let (lo, hi) = ledger.epsilon_total_bounds().unwrap();
        assert!(lo <= 3.931949 && 3.931949 <= hi, "{lo} {hi}");
        assert!(ledger.entries.windows(2).all(|w| w[1].epsilon_cum >= w[0].epsilon_cum));
    }

    #[test]
    fn calibration_example() {
        let nu = calibrate_nu(1.0, &inv_k(), &k_03(), 1.0).unwrap();
        let ScheduleSpec::Monomial { c, p } = nu else {
            panic!("calibration changed the family");
        };
        assert_eq!(p, 0.3);
        assert!((c - 7.8639).abs() < 1e-3, "{c}");
        let total = epsilon_total(&inv_k(), &nu, 1.0).unwrap().value();
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn doubling_epsilon_halves_the_noise() {
        let a = calibrate_nu(1.0, &inv_k(), &k_03(), 1.0).unwrap();
        let b = calibrate_nu(2.0, &inv_k(), &k_03(), 1.0).unwrap();
        for k in [1u64, 10, 1000] {
            assert!((a.eval(k).unwrap() / b.eval(k).unwrap() - 2.0).abs() < 1e-12);
        }
        let ea = PrivacyLedger::new(inv_k(), a, 1.0).unwrap().accumulate(100).unwrap().epsilon_cum();
        let eb = PrivacyLedger::new(inv_k(), b, 1.0).unwrap().accumulate(100).unwrap().epsilon_cum();
        assert!((eb / ea - 2.0).abs() < 1e-12);
    }

    #[test]
    fn checked_calibration_rejects_weak_coupling_decay() {
        let gamma = ScheduleSpec::power_law(1.0, 1.0).unwrap();
        let shape = ScheduleSpec::power_law_shifted(1.0, 0.1, 0.3).unwrap();
        let fast = ScheduleSpec::power_law(2.0, 0.9).unwrap();
        let slow = ScheduleSpec::power_law(2.0, 0.5).unwrap();
        assert!(calibrate_nu_checked(1.0, &gamma, &shape, 1.0, &fast).is_ok());
        assert!(matches!(
            calibrate_nu_checked(1.0, &gamma, &shape, 1.0, &slow),
            Err(AccountantError::NoiseConditionViolated(_))
        ));
    }

    #[test]
    fn ledger_csv_layout() {
        let ledger = PrivacyLedger::new(inv_k(), k_03(), 0.5).unwrap().accumulate(3).unwrap();
        let mut buf = Vec::new();
        ledger.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "k,delta_k,nu_k,increment,epsilon_cum,tail_bound");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].ends_with(','));
        assert!(!lines[3].ends_with(','));
    }
}
