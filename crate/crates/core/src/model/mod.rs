//! Contract, market and preference parameters together with the closed-form
//! pieces of the model: execution costs, the post-settlement risk-liquidity
//! premium and the stop-now value.
//!
//! The initial share loan (Q shares, usually a fraction of F/S0) never enters
//! these computations: whatever Q is, the bank ends up buying F/A - q shares
//! after settlement, so it cancels out of the optimization.

mod innovation;
mod params;
mod state;

pub use innovation::{innovation_support, moment, Innovation, EPSILONS, PROBS};
pub use params::{ContractSpec, ExerciseSchedule, MarketParams, RiskParams, VolumeCurve};
pub use state::MarketState;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, AsrError, Result};

/// A validated model: contract, market and bank parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsrModel {
    pub contract: ContractSpec,
    pub market: MarketParams,
    pub risk: RiskParams,
}

impl AsrModel {
    pub fn new(contract: ContractSpec, market: MarketParams, risk: RiskParams) -> Result<Self> {
        contract.validate()?;
        market.validate(contract.days)?;
        risk.validate()?;
        Ok(Self { contract, market, risk })
    }

    /// Re-check the invariants, e.g. after deserializing or editing fields.
    pub fn validate(&self) -> Result<()> {
        self.contract.validate()?;
        self.market.validate(self.contract.days)?;
        self.risk.validate()
    }

    /// Price move for a unit innovation, `sigma * sqrt(dt)`.
    pub fn price_step(&self) -> f64 {
        self.market.sigma * self.contract.dt.sqrt()
    }

    /// Execution cost per unit of market volume, `L(rho)`.
    pub fn execution_cost(&self, rho: f64) -> Result<f64> {
        ensure_finite("participation rate", rho)?;
        Ok(self.cost_density(rho))
    }

    #[inline]
    pub(crate) fn cost_density(&self, rho: f64) -> f64 {
        let r = rho.abs();
        if r == 0.0 {
            return 0.0;
        }
        self.market.eta * r.powf(1.0 + self.market.phi) + self.market.psi * r
    }

    /// Cost in euros of trading `shares` over one period with volume `volume`.
    #[inline]
    pub(crate) fn trading_cost(&self, shares: f64, volume: f64) -> f64 {
        let vdt = volume * self.contract.dt;
        self.cost_density(shares / vdt) * vdt
    }

    /// Coefficients `(linear, cubic)` of the post-settlement premium.
    pub(crate) fn premium_coefficients(&self) -> (f64, f64) {
        let rho = self.risk.rho_exec;
        let linear = self.cost_density(rho) / rho;
        let cubic = self.risk.gamma * self.market.sigma.powi(2)
            / (6.0 * rho * self.market.volume.mean());
        (linear, cubic)
    }

    /// Risk-liquidity premium of buying (or selling) `q` shares after settlement
    /// at constant participation.
    pub fn terminal_premium(&self, q: f64) -> f64 {
        let (linear, cubic) = self.premium_coefficients();
        let a = q.abs();
        linear * a + cubic * a * a * a
    }

    /// Effective notional `F / (1 - discount)` that converts the average price
    /// into a number of delivered shares.
    pub fn effective_notional(&self) -> f64 {
        self.contract.notional / (1.0 - self.contract.discount)
    }

    /// Shares delivered when settling with average price `a`.
    pub fn shares_due(&self, a: f64) -> f64 {
        self.effective_notional() / a
    }

    /// Value of settling now, in the same units as the value function:
    /// `F(S/A - 1) + l(F/A - q) + (k/2)(F/A - q)^2` with `A` scaled by
    /// `1 - discount`.
    pub fn intrinsic_value(&self, q: f64, s: f64, a: f64) -> Result<f64> {
        ensure_finite("q", q)?;
        ensure_finite("S", s)?;
        ensure_finite("A", a)?;
        if a <= 0.0 {
            return Err(AsrError::Domain(format!("average price must be positive, got {a}")));
        }
        Ok(self.intrinsic(q, s, a))
    }

    #[inline]
    pub(crate) fn intrinsic(&self, q: f64, s: f64, a: f64) -> f64 {
        let fe = self.effective_notional();
        let residual = fe / a - q;
        let mut v = fe * s / a - self.contract.notional + self.terminal_premium(residual);
        if self.market.k_perm > 0.0 {
            v += 0.5 * self.market.k_perm * residual * residual;
        }
        v
    }

    /// Participation window `[rho_lo V_{n+1} dt, rho_hi V_{n+1} dt]` in shares
    /// for the order sent at day `n`.
    pub fn order_bounds(&self, n: usize) -> (f64, f64) {
        let vdt = self.market.volume.next(n) * self.contract.dt;
        (self.risk.rho_lo * vdt, self.risk.rho_hi * vdt)
    }

    pub fn is_exercise_day(&self, n: usize) -> bool {
        self.contract.exercise_days().contains(&n)
    }
}

/// Parameters of the reference case.
pub mod fixtures {
    use super::*;

    /// The reference stock, contract and bank.
    pub fn reference() -> AsrModel {
        AsrModel::new(
            ContractSpec {
                notional: 9.0e8,
                days: 63,
                dt: 1.0,
                exercise: ExerciseSchedule::Window { first: 22, last: 62 },
                discount: 0.0,
            },
            MarketParams {
                s0: 45.0,
                sigma: 0.6,
                volume: VolumeCurve::Constant(4.0e6),
                eta: 0.1,
                phi: 0.75,
                psi: 0.0,
                k_perm: 0.0,
            },
            RiskParams { gamma: 2.5e-7, rho_lo: -0.25, rho_hi: 0.25, rho_exec: 0.25 },
        )
        .unwrap()
    }
}
