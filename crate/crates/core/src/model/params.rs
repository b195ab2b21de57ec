//! Parameter records for the contract, the traded stock and the bank.
//!
//! Monetary amounts are in euros, volumes in shares, and time in days.

use serde::{Deserialize, Serialize};

use crate::error::{AsrError, Result};

/// Days on which the bank may settle early.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExerciseSchedule {
    /// Every day from `first` to `last`, both included.
    Window { first: usize, last: usize },
    /// An explicit list of days.
    Days(Vec<usize>),
}

impl ExerciseSchedule {
    pub fn days(&self) -> Vec<usize> {
        match self {
            ExerciseSchedule::Window { first, last } => (*first..=*last).collect(),
            ExerciseSchedule::Days(days) => {
                let mut days = days.clone();
                days.sort_unstable();
                days.dedup();
                days
            }
        }
    }
}

/// Fixed-notional ASR contract terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSpec {
    /// Cash notional F paid by the firm (EUR).
    pub notional: f64,
    /// Number of trading days N until forced settlement.
    pub days: usize,
    /// Length of one period (days).
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Early-exercise days, a subset of 1..N-1.
    pub exercise: ExerciseSchedule,
    /// Discount on the average price; the firm receives F/((1-discount)A) shares.
    #[serde(default)]
    pub discount: f64,
}

fn default_dt() -> f64 {
    1.0
}

impl ContractSpec {
    pub fn exercise_days(&self) -> Vec<usize> {
        self.exercise.days()
    }

    /// First day on which early exercise is allowed.
    pub fn first_exercise_day(&self) -> Option<usize> {
        self.exercise_days().first().copied()
    }

    /// `flags[n]` is true when day `n` is an early-exercise day.
    pub fn exercise_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.days + 1];
        for d in self.exercise_days() {
            if d < flags.len() {
                flags[d] = true;
            }
        }
        flags
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.notional.is_finite() && self.notional >= 0.0) {
            return Err(AsrError::InvalidParameter(format!(
                "notional must be finite and non-negative, got {}",
                self.notional
            )));
        }
        if self.days < 2 {
            return Err(AsrError::InvalidParameter(
                "contract needs at least two trading days".into(),
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(AsrError::InvalidParameter(format!("dt must be positive, got {}", self.dt)));
        }
        let days = self.exercise_days();
        if days.is_empty() {
            return Err(AsrError::InvalidParameter("exercise schedule is empty".into()));
        }
        if let Some(bad) = days.iter().find(|&&d| d == 0 || d >= self.days) {
            return Err(AsrError::InvalidParameter(format!(
                "exercise day {bad} outside 1..={}",
                self.days - 1
            )));
        }
        if !(self.discount.is_finite() && (0.0..1.0).contains(&self.discount)) {
            return Err(AsrError::InvalidParameter(format!(
                "discount must lie in [0, 1), got {}",
                self.discount
            )));
        }
        Ok(())
    }
}

/// Market volume per day, constant or given day by day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VolumeCurve {
    Constant(f64),
    /// `V_1, ..., V_N`: entry `n` is the volume traded over day `n + 1`.
    PerDay(Vec<f64>),
}

impl VolumeCurve {
    /// Volume `V_{n+1}` available for the order sent at day `n`.
    pub fn next(&self, n: usize) -> f64 {
        match self {
            VolumeCurve::Constant(v) => *v,
            VolumeCurve::PerDay(values) => values[n.min(values.len() - 1)],
        }
    }

    pub fn mean(&self) -> f64 {
        match self {
            VolumeCurve::Constant(v) => *v,
            VolumeCurve::PerDay(values) => values.iter().sum::<f64>() / values.len() as f64,
        }
    }

    pub fn max(&self) -> f64 {
        match self {
            VolumeCurve::Constant(v) => *v,
            VolumeCurve::PerDay(values) => values.iter().cloned().fold(f64::MIN, f64::max),
        }
    }

    pub fn constant(&self) -> Option<f64> {
        match self {
            VolumeCurve::Constant(v) => Some(*v),
            VolumeCurve::PerDay(values) => {
                let first = values[0];
                values.iter().all(|&v| v == first).then_some(first)
            }
        }
    }
}

/// Stock dynamics and execution-cost coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketParams {
    /// Initial price S0 (EUR).
    pub s0: f64,
    /// Arithmetic volatility (EUR per square-root day).
    pub sigma: f64,
    /// Market volume (shares per day).
    pub volume: VolumeCurve,
    /// Execution-cost scale (EUR per share per day).
    pub eta: f64,
    /// Execution-cost exponent; cost per share grows like rho^phi.
    pub phi: f64,
    /// Proportional execution cost (EUR per share).
    #[serde(default)]
    pub psi: f64,
    /// Linear permanent impact (EUR per share); zero in the base model.
    #[serde(default)]
    pub k_perm: f64,
}

impl MarketParams {
    pub fn validate(&self, days: usize) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(AsrError::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(AsrError::InvalidParameter(format!("{name} must be non-negative, got {v}")))
            }
        };
        positive("s0", self.s0)?;
        non_negative("sigma", self.sigma)?;
        positive("eta", self.eta)?;
        positive("phi", self.phi)?;
        non_negative("psi", self.psi)?;
        non_negative("k_perm", self.k_perm)?;
        match &self.volume {
            VolumeCurve::Constant(v) => positive("volume", *v)?,
            VolumeCurve::PerDay(values) => {
                if values.len() != days {
                    return Err(AsrError::InvalidParameter(format!(
                        "volume curve has {} entries, expected one per day ({days})",
                        values.len()
                    )));
                }
                for v in values {
                    positive("volume", *v)?;
                }
            }
        }
        Ok(())
    }
}

/// Preferences and trading constraints of the bank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskParams {
    /// Absolute risk aversion (1/EUR); zero selects the risk-neutral limit.
    pub gamma: f64,
    /// Lower participation bound; negative values allow selling.
    pub rho_lo: f64,
    /// Upper participation bound.
    pub rho_hi: f64,
    /// Participation rate of the execution that follows settlement.
    pub rho_exec: f64,
}

impl RiskParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(AsrError::InvalidParameter(format!(
                "gamma must be non-negative, got {}",
                self.gamma
            )));
        }
        if !(self.rho_lo.is_finite() && self.rho_hi.is_finite() && self.rho_lo < self.rho_hi) {
            return Err(AsrError::InvalidParameter(format!(
                "participation bounds must satisfy rho_lo < rho_hi, got [{}, {}]",
                self.rho_lo, self.rho_hi
            )));
        }
        if self.rho_hi <= 0.0 {
            return Err(AsrError::InvalidParameter("rho_hi must be positive".into()));
        }
        if !(self.rho_exec.is_finite() && self.rho_exec > 0.0) {
            return Err(AsrError::InvalidParameter("rho_exec must be positive".into()));
        }
        Ok(())
    }
}
