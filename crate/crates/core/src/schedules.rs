//! Nonnegative scalar sequences for stepsizes, coupling gains, drift bounds
//! and noise scales, with exact summability verdicts for the parametric
//! families.
//!
//! | family               | `s^k`               |
//! |----------------------|---------------------|
//! | `power_law`          | `c / (1 + k^p)`     |
//! | `power_law_lagged`   | `c / (1 + k)^p`     |
//! | `power_law_shifted`  | `c0 + c1 · k^p`     |
//! | `monomial`           | `c · k^p`           |
//! | `geometric`          | `c · q^k`           |
//! | `table`              | explicit values     |
//!
//! Rounds are indexed from `k = 0`.
//!
//! Every parametric family is bracketed for large `k` by an [`Envelope`]
//! `lower · k^e · q^k ≤ s^k ≤ upper · k^e · q^k`. Products and quotients of
//! envelopes decide series convergence (p-series and ratio tests) and give
//! rigorous integral bounds on series tails. Tables have no envelope, so any
//! verdict depending on one is [`Verdict::Unknown`].

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Exponent slack when comparing against the p-series boundary `-1`.
const EXPONENT_TOLERANCE: f64 = 1e-9;
/// Relative slack when comparing a geometric ratio against `1`.
const RATIO_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("invalid {family} schedule: {reason}")]
    InvalidParameters {
        family: &'static str,
        reason: String,
    },
    #[error("round {k} is past the end of a {len}-entry table")]
    PastTableEnd { k: u64, len: usize },
    #[error("schedule is singular at k = 0")]
    SingularAtZero,
}

/// What a table does for rounds past its last entry.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableTail {
    #[default]
    HoldLast,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ScheduleSpec {
    /// `c / (1 + k^p)`, `c > 0`, `p ≥ 0`.
    PowerLaw { c: f64, p: f64 },
    /// `c / (1 + k)^p`, `c > 0`, any real `p` (negative `p` grows).
    PowerLawLagged { c: f64, p: f64 },
    /// `c0 + c1 · k^p`, all parameters nonnegative.
    PowerLawShifted { c0: f64, c1: f64, p: f64 },
    /// `c · k^p`, `c ≥ 0`, any real `p`; singular at `k = 0` when `p < 0`.
    Monomial { c: f64, p: f64 },
    /// `c · q^k`, `c > 0`, `0 < q < 1`.
    Geometric { c: f64, q: f64 },
    Table {
        values: Vec<f64>,
        #[serde(default)]
        tail: TableTail,
    },
}

fn invalid(family: &'static str, reason: impl Into<String>) -> ScheduleError {
    ScheduleError::InvalidParameters {
        family,
        reason: reason.into(),
    }
}

impl ScheduleSpec {
    pub fn power_law(c: f64, p: f64) -> Result<Self, ScheduleError> {
        Self::PowerLaw { c, p }.validated()
    }

    pub fn power_law_lagged(c: f64, p: f64) -> Result<Self, ScheduleError> {
        Self::PowerLawLagged { c, p }.validated()
    }

    pub fn power_law_shifted(c0: f64, c1: f64, p: f64) -> Result<Self, ScheduleError> {
        Self::PowerLawShifted { c0, c1, p }.validated()
    }

    pub fn monomial(c: f64, p: f64) -> Result<Self, ScheduleError> {
        Self::Monomial { c, p }.validated()
    }

    pub fn geometric(c: f64, q: f64) -> Result<Self, ScheduleError> {
        Self::Geometric { c, q }.validated()
    }

    pub fn table(values: Vec<f64>, tail: TableTail) -> Result<Self, ScheduleError> {
        Self::Table { values, tail }.validated()
    }

    /// Constant sequence `c`.
    pub fn constant(c: f64) -> Result<Self, ScheduleError> {
        Self::power_law_shifted(c, 0.0, 0.0)
    }

    fn validated(self) -> Result<Self, ScheduleError> {
        self.validate()?;
        Ok(self)
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Self::PowerLaw { .. } => "power_law",
            Self::PowerLawLagged { .. } => "power_law_lagged",
            Self::PowerLawShifted { .. } => "power_law_shifted",
            Self::Monomial { .. } => "monomial",
            Self::Geometric { .. } => "geometric",
            Self::Table { .. } => "table",
        }
    }

    /// Checks parameter ranges; deserialized specs must pass this before use.
    pub fn validate(&self) -> Result<(), ScheduleError> {
        let name = self.family_name();
        let finite = |v: f64, what: &str| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("{what} = {v} is not finite")))
            }
        };
        match *self {
            Self::PowerLaw { c, p } => {
                finite(c, "c")?;
                finite(p, "p")?;
                if c <= 0.0 || p < 0.0 {
                    return Err(invalid(name, format!("need c > 0 and p >= 0, got c = {c}, p = {p}")));
                }
            }
            Self::PowerLawLagged { c, p } => {
                finite(c, "c")?;
                finite(p, "p")?;
                if c <= 0.0 {
                    return Err(invalid(name, format!("need c > 0, got {c}")));
                }
            }
            Self::PowerLawShifted { c0, c1, p } => {
                finite(c0, "c0")?;
                finite(c1, "c1")?;
                finite(p, "p")?;
                if c0 < 0.0 || c1 < 0.0 || p < 0.0 {
                    return Err(invalid(name, "c0, c1 and p must be nonnegative"));
                }
            }
            Self::Monomial { c, p } => {
                finite(c, "c")?;
                finite(p, "p")?;
                if c < 0.0 {
                    return Err(invalid(name, format!("need c >= 0, got {c}")));
                }
            }
            Self::Geometric { c, q } => {
                finite(c, "c")?;
                finite(q, "q")?;
                if c <= 0.0 || !(q > 0.0 && q < 1.0) {
                    return Err(invalid(name, format!("need c > 0 and 0 < q < 1, got c = {c}, q = {q}")));
                }
            }
            Self::Table { ref values, .. } => {
                if values.is_empty() {
                    return Err(invalid(name, "table is empty"));
                }
                if let Some((k, v)) = values
                    .iter()
                    .enumerate()
                    .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
                {
                    return Err(invalid(name, format!("entry {k} = {v} is not a finite nonnegative value")));
                }
            }
        }
        Ok(())
    }

    /// `s^k`.
    pub fn eval(&self, k: u64) -> Result<f64, ScheduleError> {
        let kf = k as f64;
        Ok(match *self {
            Self::PowerLaw { c, p } => c / (1.0 + kf.powf(p)),
            Self::PowerLawLagged { c, p } => c / (1.0 + kf).powf(p),
            Self::PowerLawShifted { c0, c1, p } => c0 + c1 * kf.powf(p),
            Self::Monomial { c, p } => {
                if k == 0 && p < 0.0 {
                    return Err(ScheduleError::SingularAtZero);
                }
                c * kf.powf(p)
            }
            Self::Geometric { c, q } => c * q.powf(kf),
            Self::Table { ref values, tail } => match values.get(k as usize) {
                Some(v) => *v,
                None => match tail {
                    TableTail::HoldLast => *values.last().expect("validated tables are nonempty"),
                    TableTail::Error => {
                        return Err(ScheduleError::PastTableEnd {
                            k,
                            len: values.len(),
                        })
                    }
                },
            },
        })
    }

    /// The same family with every value multiplied by `factor ≥ 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self, ScheduleError> {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(invalid(self.family_name(), format!("scale factor {factor} must be finite and nonnegative")));
        }
        let out = match self.clone() {
            Self::PowerLaw { c, p } => Self::PowerLaw { c: c * factor, p },
            Self::PowerLawLagged { c, p } => Self::PowerLawLagged { c: c * factor, p },
            Self::PowerLawShifted { c0, c1, p } => Self::PowerLawShifted {
                c0: c0 * factor,
                c1: c1 * factor,
                p,
            },
            Self::Monomial { c, p } => Self::Monomial { c: c * factor, p },
            Self::Geometric { c, q } => Self::Geometric { c: c * factor, q },
            Self::Table { values, tail } => Self::Table {
                values: values.into_iter().map(|v| v * factor).collect(),
                tail,
            },
        };
        out.validated()
    }

    /// Bracket valid for all `k ≥ from` (`from ≥ 1`); `None` for tables.
    pub fn envelope(&self, from: u64) -> Option<Envelope> {
        let from = from.max(1);
        let kf = from as f64;
        let env = |exponent, ratio, lower, upper| Envelope {
            exponent,
            ratio,
            lower,
            upper,
            from,
        };
        Some(match *self {
            Self::PowerLaw { c, p } => {
                if p == 0.0 {
                    env(0.0, 1.0, c / 2.0, c / 2.0)
                } else {
                    // c k^-p / (1 + k^-p), and k^-p ≤ from^-p.
                    env(-p, 1.0, c / (1.0 + kf.powf(-p)), c)
                }
            }
            Self::PowerLawLagged { c, p } => {
                // c k^-p (1 + 1/k)^-p
                let edge = (1.0 + 1.0 / kf).powf(-p);
                let (lo, hi) = if p >= 0.0 { (edge, 1.0) } else { (1.0, edge) };
                env(-p, 1.0, c * lo, c * hi)
            }
            Self::PowerLawShifted { c0, c1, p } => {
                if c1 == 0.0 || p == 0.0 {
                    env(0.0, 1.0, c0 + c1, c0 + c1)
                } else {
                    env(p, 1.0, c1, c1 + c0 * kf.powf(-p))
                }
            }
            Self::Monomial { c, p } => env(p, 1.0, c, c),
            Self::Geometric { c, q } => env(0.0, q, c, c),
            Self::Table { .. } => return None,
        })
    }

    /// Verdicts on `Σ s^k = ∞` and `Σ (s^k)² < ∞`.
    pub fn summability(&self) -> ScheduleReport {
        let env = self.envelope(1);
        let sum = series_verdict(env);
        let squares = series_verdict(env.map(|e| e.squared()));
        ScheduleReport {
            conditions: vec![
                Condition::new(ConditionKind::SumDiverges, sum.diverges(), describe("Σ s^k", env)),
                Condition::new(
                    ConditionKind::SquareSummable,
                    squares.converges(),
                    describe("Σ (s^k)²", env.map(|e| e.squared())),
                ),
            ],
        }
    }
}

impl fmt::Display for ScheduleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::PowerLaw { c, p } => write!(f, "{c}/(1+k^{p})"),
            Self::PowerLawLagged { c, p } => write!(f, "{c}/(1+k)^{p}"),
            Self::PowerLawShifted { c0, c1, p } => write!(f, "{c0}+{c1}k^{p}"),
            Self::Monomial { c, p } => write!(f, "{c}k^{p}"),
            Self::Geometric { c, q } => write!(f, "{c}*{q}^k"),
            Self::Table { values, tail } => write!(f, "table[{} entries, {tail:?}]", values.len()),
        }
    }
}

/// `lower · k^exponent · ratio^k ≤ s^k ≤ upper · k^exponent · ratio^k` for all `k ≥ from`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub exponent: f64,
    pub ratio: f64,
    pub lower: f64,
    pub upper: f64,
    pub from: u64,
}

impl Envelope {
    pub fn product(self, other: Envelope) -> Envelope {
        Envelope {
            exponent: self.exponent + other.exponent,
            ratio: self.ratio * other.ratio,
            lower: self.lower * other.lower,
            upper: self.upper * other.upper,
            from: self.from.max(other.from),
        }
    }

    /// `None` when the denominator may vanish.
    pub fn quotient(self, other: Envelope) -> Option<Envelope> {
        if other.lower <= 0.0 {
            return None;
        }
        Some(Envelope {
            exponent: self.exponent - other.exponent,
            ratio: self.ratio / other.ratio,
            lower: self.lower / other.upper,
            upper: self.upper / other.lower,
            from: self.from.max(other.from),
        })
    }

    pub fn squared(self) -> Envelope {
        self.product(self)
    }

    pub fn scaled(self, factor: f64) -> Envelope {
        Envelope {
            lower: self.lower * factor,
            upper: self.upper * factor,
            ..self
        }
    }

    fn ratio_class(&self) -> std::cmp::Ordering {
        use std::cmp::Ordering::*;
        if self.ratio < 1.0 - RATIO_TOLERANCE {
            Less
        } else if self.ratio > 1.0 + RATIO_TOLERANCE {
            Greater
        } else {
            Equal
        }
    }

    /// Convergence of `Σ_k s^k`.
    pub fn series_verdict(&self) -> SeriesVerdict {
        use std::cmp::Ordering::*;
        if self.upper == 0.0 {
            return SeriesVerdict::Converges;
        }
        let converges = match self.ratio_class() {
            Less => true,
            Greater => false,
            Equal => self.exponent < -1.0 - EXPONENT_TOLERANCE,
        };
        if converges {
            SeriesVerdict::Converges
        } else if self.lower > 0.0 {
            SeriesVerdict::Diverges
        } else {
            SeriesVerdict::Unknown
        }
    }

    /// Whether `s^k` stays bounded as `k → ∞`.
    pub fn bounded_verdict(&self) -> Verdict {
        use std::cmp::Ordering::*;
        if self.upper == 0.0 {
            return Verdict::Holds;
        }
        let bounded = match self.ratio_class() {
            Less => true,
            Greater => false,
            Equal => self.exponent <= EXPONENT_TOLERANCE,
        };
        if bounded {
            Verdict::Holds
        } else if self.lower > 0.0 {
            Verdict::Fails
        } else {
            Verdict::Unknown
        }
    }

    /// Bounds `(lower, upper)` on `Σ_{k > from} s^k`, when the envelope
    /// admits a closed-form integral or geometric bound.
    pub fn tail_bounds(&self) -> Option<(f64, f64)> {
        use std::cmp::Ordering::*;
        if self.upper == 0.0 {
            return Some((0.0, 0.0));
        }
        let k0 = self.from as f64;
        let k1 = k0 + 1.0;
        match self.ratio_class() {
            Equal if self.exponent < -1.0 - EXPONENT_TOLERANCE => {
                // s^k decreasing envelope: ∫_{K+1}^∞ ≤ Σ_{k>K} ≤ ∫_K^∞.
                let a = -self.exponent - 1.0;
                Some((
                    self.lower * k1.powf(-a) / a,
                    self.upper * k0.powf(-a) / a,
                ))
            }
            Less if self.exponent <= 0.0 => {
                let q = self.ratio;
                let first = k1.powf(self.exponent) * q.powf(k1);
                let lower = if self.exponent == 0.0 {
                    self.lower * first / (1.0 - q)
                } else {
                    self.lower * first
                };
                Some((lower, self.upper * first / (1.0 - q)))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    Converges,
    Diverges,
    Unknown,
}

impl SeriesVerdict {
    fn converges(self) -> Verdict {
        match self {
            Self::Converges => Verdict::Holds,
            Self::Diverges => Verdict::Fails,
            Self::Unknown => Verdict::Unknown,
        }
    }

    fn diverges(self) -> Verdict {
        match self {
            Self::Converges => Verdict::Fails,
            Self::Diverges => Verdict::Holds,
            Self::Unknown => Verdict::Unknown,
        }
    }
}

fn series_verdict(env: Option<Envelope>) -> SeriesVerdict {
    env.map_or(SeriesVerdict::Unknown, |e| e.series_verdict())
}

fn describe(what: &str, env: Option<Envelope>) -> String {
    match env {
        None => format!("{what}: undecidable beyond a finite table"),
        Some(e) if e.ratio_class() != std::cmp::Ordering::Equal => {
            format!("{what}: terms ~ k^{:.4} * {:.6}^k", e.exponent, e.ratio)
        }
        Some(e) => format!("{what}: terms ~ k^{:.4}", e.exponent),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Unknown,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Holds => "pass",
            Self::Fails => "FAIL",
            Self::Unknown => "unknown",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    SumDiverges,
    SquareSummable,
    AlphaSumDiverges,
    AlphaSquareSummable,
    ChiSumDiverges,
    ChiSquareSummable,
    GammaSquaredOverChiSummable,
    AlphaOverGammaBounded,
    NoiseVarianceSummable,
}

impl fmt::Display for ConditionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::SumDiverges => "sum s^k = inf",
            Self::SquareSummable => "sum (s^k)^2 < inf",
            Self::AlphaSumDiverges => "sum alpha^k = inf",
            Self::AlphaSquareSummable => "sum (alpha^k)^2 < inf",
            Self::ChiSumDiverges => "sum chi^k = inf",
            Self::ChiSquareSummable => "sum (chi^k)^2 < inf",
            Self::GammaSquaredOverChiSummable => "sum (gamma^k)^2/chi^k < inf",
            Self::AlphaOverGammaBounded => "lim alpha^k/gamma^k < inf",
            Self::NoiseVarianceSummable => "sum (chi^k)^2 (sigma^k)^2 < inf",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Condition {
    pub kind: ConditionKind,
    pub verdict: Verdict,
    pub detail: String,
}

impl Condition {
    fn new(kind: ConditionKind, verdict: Verdict, detail: String) -> Self {
        Self {
            kind,
            verdict,
            detail,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScheduleReport {
    pub conditions: Vec<Condition>,
}

impl ScheduleReport {
    pub fn verdict(&self, kind: ConditionKind) -> Option<Verdict> {
        self.conditions.iter().find(|c| c.kind == kind).map(|c| c.verdict)
    }

    pub fn all_hold(&self) -> bool {
        self.conditions.iter().all(|c| c.verdict == Verdict::Holds)
    }

    pub fn any_fails(&self) -> bool {
        self.conditions.iter().any(|c| c.verdict == Verdict::Fails)
    }
}

/// Checks the stepsize, coupling and drift schedules for exact tracking:
/// `Σα = ∞`, `Σα² < ∞`, `Σχ = ∞`, `Σχ² < ∞`, `Σγ²/χ < ∞`, and
/// `lim α/γ < ∞`.
///
/// `Σα² < ∞` is enforced alongside `Σα = ∞` because the mean-tracking and
/// contraction arguments both rely on it.
pub fn validate_theorem1(alpha: &ScheduleSpec, chi: &ScheduleSpec, gamma: &ScheduleSpec) -> ScheduleReport {
    let a = alpha.envelope(1);
    let c = chi.envelope(1);
    let g = gamma.envelope(1);

    let alpha_sq = a.map(Envelope::squared);
    let chi_sq = c.map(Envelope::squared);
    let ratio = match (g, c) {
        (Some(g), Some(c)) => g.squared().quotient(c),
        _ => None,
    };
    let alpha_over_gamma = match (a, g) {
        (Some(a), Some(g)) => a.quotient(g),
        _ => None,
    };

    ScheduleReport {
        conditions: vec![
            Condition::new(ConditionKind::AlphaSumDiverges, series_verdict(a).diverges(), describe("Σ α^k", a)),
            Condition::new(
                ConditionKind::AlphaSquareSummable,
                series_verdict(alpha_sq).converges(),
                describe("Σ (α^k)²", alpha_sq),
            ),
            Condition::new(ConditionKind::ChiSumDiverges, series_verdict(c).diverges(), describe("Σ χ^k", c)),
            Condition::new(
                ConditionKind::ChiSquareSummable,
                series_verdict(chi_sq).converges(),
                describe("Σ (χ^k)²", chi_sq),
            ),
            Condition::new(
                ConditionKind::GammaSquaredOverChiSummable,
                series_verdict(ratio).converges(),
                describe("Σ (γ^k)²/χ^k", ratio),
            ),
            Condition::new(
                ConditionKind::AlphaOverGammaBounded,
                alpha_over_gamma.map_or(Verdict::Unknown, |e| e.bounded_verdict()),
                match alpha_over_gamma {
                    Some(e) => format!("α^k/γ^k ~ k^{:.4} * {:.6}^k", e.exponent, e.ratio),
                    None => "α^k/γ^k: undecidable".to_owned(),
                },
            ),
        ],
    }
}

/// Checks `Σ (χ^k)² (σ^k)² < ∞` where `sigma_max` is the schedule of the
/// per-round noise standard deviation bound (`√2·ν^k` for Laplace noise).
pub fn validate_assumption2(chi: &ScheduleSpec, sigma_max: &ScheduleSpec) -> ScheduleReport {
    let term = match (chi.envelope(1), sigma_max.envelope(1)) {
        (Some(c), Some(s)) => Some(c.product(s).squared()),
        _ => None,
    };
    ScheduleReport {
        conditions: vec![Condition::new(
            ConditionKind::NoiseVarianceSummable,
            series_verdict(term).converges(),
            describe("Σ (χ^k σ^k)²", term),
        )],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_alpha() -> ScheduleSpec {
        ScheduleSpec::power_law(0.01, 1.0).unwrap()
    }
    fn reference_chi() -> ScheduleSpec {
        ScheduleSpec::power_law(2.0, 0.9).unwrap()
    }
    fn harmonic_gamma() -> ScheduleSpec {
        ScheduleSpec::power_law(1.0, 1.0).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(reference_alpha().eval(0).unwrap(), 0.01);
        let nu = ScheduleSpec::power_law_shifted(1.0, 0.1, 0.2).unwrap();
        assert_eq!(nu.eval(0).unwrap(), 1.0);
        // c/(1+k^p) at k=1 is c/2 regardless of p; the lagged form gives c/2^p.
        assert_eq!(reference_chi().eval(1).unwrap(), 1.0);
        let lagged = ScheduleSpec::power_law_lagged(2.0, 0.9).unwrap();
        assert!((lagged.eval(1).unwrap() - 1.071773462536293).abs() < 1e-12);
        assert!((reference_chi().eval(10).unwrap() - 2.0 / (1.0 + 10f64.powf(0.9))).abs() < 1e-15);
    }

    #[test]
    fn monomial_and_geometric_eval() {
        let inv = ScheduleSpec::monomial(1.0, -1.0).unwrap();
        assert_eq!(inv.eval(0), Err(ScheduleError::SingularAtZero));
        assert_eq!(inv.eval(4).unwrap(), 0.25);
        let grow = ScheduleSpec::monomial(2.0, 0.3).unwrap();
        assert_eq!(grow.eval(0).unwrap(), 0.0);
        let geo = ScheduleSpec::geometric(3.0, 0.5).unwrap();
        assert_eq!(geo.eval(3).unwrap(), 0.375);
    }

    #[test]
    fn table_tail_rules() {
        let hold = ScheduleSpec::table(vec![0.5, 0.25], TableTail::HoldLast).unwrap();
        assert_eq!(hold.eval(1).unwrap(), 0.25);
        assert_eq!(hold.eval(100).unwrap(), 0.25);
        let strict = ScheduleSpec::table(vec![0.5, 0.25], TableTail::Error).unwrap();
        assert_eq!(strict.eval(2), Err(ScheduleError::PastTableEnd { k: 2, len: 2 }));
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(ScheduleSpec::power_law(0.0, 1.0).is_err());
        assert!(ScheduleSpec::power_law(1.0, -0.5).is_err());
        assert!(ScheduleSpec::power_law_shifted(-1.0, 0.1, 0.2).is_err());
        assert!(ScheduleSpec::geometric(1.0, 1.0).is_err());
        assert!(ScheduleSpec::table(vec![], TableTail::HoldLast).is_err());
        assert!(ScheduleSpec::table(vec![1.0, -0.1], TableTail::HoldLast).is_err());
        assert!(ScheduleSpec::power_law(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn scaling_preserves_family() {
        let nu = ScheduleSpec::power_law_shifted(1.0, 0.1, 0.2).unwrap();
        let doubled = nu.scaled(2.0).unwrap();
        for k in [0, 1, 7, 1000] {
            assert_eq!(doubled.eval(k).unwrap(), 2.0 * nu.eval(k).unwrap());
        }
        assert_eq!(doubled.family_name(), "power_law_shifted");
    }

    #[test]
    fn reference_schedules_pass_every_condition() {
        let report = validate_theorem1(&reference_alpha(), &reference_chi(), &harmonic_gamma());
        assert!(report.all_hold(), "{report:#?}");
    }

    #[test]
    fn slowly_decaying_alpha_is_not_square_summable() {
        let alpha = ScheduleSpec::power_law(1.0, 0.4).unwrap();
        let report = validate_theorem1(&alpha, &reference_chi(), &harmonic_gamma());
        assert_eq!(report.verdict(ConditionKind::AlphaSquareSummable), Some(Verdict::Fails));
    }

    #[test]
    fn ratio_condition_fails_for_slow_gamma() {
        let gamma = ScheduleSpec::power_law(1.0, 0.6).unwrap();
        let chi = ScheduleSpec::power_law(1.0, 0.9).unwrap();
        let report = validate_theorem1(&reference_alpha(), &chi, &gamma);
        assert_eq!(report.verdict(ConditionKind::GammaSquaredOverChiSummable), Some(Verdict::Fails));
        // α decays faster than γ here, so the side condition still holds.
        assert_eq!(report.verdict(ConditionKind::AlphaOverGammaBounded), Some(Verdict::Holds));
    }

    #[test]
    fn alpha_over_gamma_unbounded_when_alpha_decays_slower() {
        let alpha = ScheduleSpec::power_law(1.0, 0.6).unwrap();
        let report = validate_theorem1(&alpha, &reference_chi(), &harmonic_gamma());
        assert_eq!(report.verdict(ConditionKind::AlphaOverGammaBounded), Some(Verdict::Fails));
    }

    #[test]
    fn noise_condition_examples() {
        let sigma = |growth: f64| {
            ScheduleSpec::power_law_shifted(1.0, 0.1, growth)
                .unwrap()
                .scaled(2f64.sqrt())
                .unwrap()
        };
        let chi09 = reference_chi();
        assert!(validate_assumption2(&chi09, &sigma(0.2)).all_hold());
        assert!(validate_assumption2(&chi09, &sigma(0.3)).all_hold());
        let chi05 = ScheduleSpec::power_law(2.0, 0.5).unwrap();
        assert!(validate_assumption2(&chi05, &sigma(0.3)).any_fails());
    }

    #[test]
    fn tables_are_undecidable() {
        let table = ScheduleSpec::table(vec![1.0, 0.5, 0.25], TableTail::HoldLast).unwrap();
        let report = table.summability();
        assert!(report.conditions.iter().all(|c| c.verdict == Verdict::Unknown));
        let r = validate_theorem1(&table, &reference_chi(), &harmonic_gamma());
        assert_eq!(r.verdict(ConditionKind::AlphaSumDiverges), Some(Verdict::Unknown));
        assert_eq!(r.verdict(ConditionKind::ChiSumDiverges), Some(Verdict::Holds));
    }

    #[test]
    fn power_law_summability_is_the_p_series_test() {
        for (p, diverges, square) in [(0.4, true, false), (0.5, true, false), (0.9, true, true), (1.0, true, true), (1.2, false, true)] {
            let r = ScheduleSpec::power_law(1.0, p).unwrap().summability();
            let want = |b| if b { Verdict::Holds } else { Verdict::Fails };
            assert_eq!(r.verdict(ConditionKind::SumDiverges), Some(want(diverges)), "p = {p}");
            assert_eq!(r.verdict(ConditionKind::SquareSummable), Some(want(square)), "p = {p}");
        }
    }

    #[test]
    fn geometric_is_summable() {
        let r = ScheduleSpec::geometric(1.0, 0.99).unwrap().summability();
        assert_eq!(r.verdict(ConditionKind::SumDiverges), Some(Verdict::Fails));
        assert_eq!(r.verdict(ConditionKind::SquareSummable), Some(Verdict::Holds));
    }

    #[test]
    fn envelopes_bracket_the_schedules() {
        let specs = [
            ScheduleSpec::power_law(2.0, 0.9).unwrap(),
            ScheduleSpec::power_law(1.0, 0.0).unwrap(),
            ScheduleSpec::power_law_lagged(1.5, 1.3).unwrap(),
            ScheduleSpec::power_law_lagged(1.5, -0.3).unwrap(),
            ScheduleSpec::power_law_shifted(1.0, 0.1, 0.2).unwrap(),
            ScheduleSpec::monomial(3.0, -1.0).unwrap(),
            ScheduleSpec::geometric(2.0, 0.9).unwrap(),
        ];
        for spec in &specs {
            for from in [1u64, 3, 50] {
                let e = spec.envelope(from).unwrap();
                for k in from..from + 200 {
                    let kf = k as f64;
                    let shape = kf.powf(e.exponent) * e.ratio.powf(kf);
                    let v = spec.eval(k).unwrap();
                    assert!(v >= e.lower * shape * (1.0 - 1e-12), "{spec}: k={k}");
                    assert!(v <= e.upper * shape * (1.0 + 1e-12), "{spec}: k={k}");
                }
            }
        }
    }

    #[test]
    fn zeta_tail_bounds_bracket_the_truth() {
        // Σ_{k>10} k^-2 = π²/6 − Σ_{k≤10} k^-2.
        let e = ScheduleSpec::monomial(1.0, -2.0).unwrap().envelope(10).unwrap();
        let (lo, hi) = e.tail_bounds().unwrap();
        let head: f64 = (1..=10).map(|k| 1.0 / (k * k) as f64).sum();
        let truth = std::f64::consts::PI.powi(2) / 6.0 - head;
        assert!(lo <= truth && truth <= hi, "{lo} {truth} {hi}");
    }

    #[test]
    fn geometric_tail_is_exact() {
        let e = ScheduleSpec::geometric(1.0, 0.5).unwrap().envelope(3).unwrap();
        let (lo, hi) = e.tail_bounds().unwrap();
        assert!((lo - 0.125).abs() < 1e-15 && (hi - 0.125).abs() < 1e-15);
    }

    #[test]
    fn serde_names_match_config_schema() {
        let spec: ScheduleSpec = toml::from_str("family = \"power_law_shifted\"\nc0 = 1.0\nc1 = 0.1\np = 0.2\n").unwrap();
        assert_eq!(spec, ScheduleSpec::power_law_shifted(1.0, 0.1, 0.2).unwrap());
        let table: ScheduleSpec = serde_json::from_str(r#"{"family":"table","values":[1.0,0.5]}"#).unwrap();
        assert_eq!(table, ScheduleSpec::table(vec![1.0, 0.5], TableTail::HoldLast).unwrap());
    }
}
