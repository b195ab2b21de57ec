use serde::{Deserialize, Serialize};

use super::AsrModel;
use crate::error::{ensure_finite, AsrError, Result};

/// State of an ASR position at the start of day `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketState {
    /// Day index.
    pub n: usize,
    /// Current price (EUR).
    pub s: f64,
    /// Running average of S_1..S_n; S0 on day 0.
    pub a: f64,
    /// Shares bought so far.
    pub q: f64,
    /// Cash spent so far (EUR).
    pub x: f64,
}

impl MarketState {
    pub fn initial(model: &AsrModel) -> Self {
        let s0 = model.market.s0;
        Self { n: 0, s: s0, a: s0, q: 0.0, x: 0.0 }
    }

    /// One day forward: the bank trades at rate `v` (shares/day) and the
    /// price moves by `sigma sqrt(dt) eps` plus permanent impact `k v dt`.
    ///
    /// `eps_prime` drives the intraday execution noise of the closing-price
    /// convention; pass zero when that term is not modelled.
    pub fn step(&self, model: &AsrModel, v: f64, eps: f64, eps_prime: f64) -> Result<Self> {
        ensure_finite("eps", eps)?;
        let dt = model.contract.dt;
        let s_next = self.s + model.price_step() * eps + model.market.k_perm * v * dt;
        self.advance_to(model, v, s_next, eps_prime)
    }

    /// One day forward to an observed price `s_next`.
    pub fn advance_to(&self, model: &AsrModel, v: f64, s_next: f64, eps_prime: f64) -> Result<Self> {
        ensure_finite("trading rate", v)?;
        ensure_finite("price", s_next)?;
        ensure_finite("eps_prime", eps_prime)?;
        let n = self.n;
        if n >= model.contract.days {
            return Err(AsrError::Domain(format!("no trading after day {}", model.contract.days)));
        }
        let volume = model.market.volume.next(n);
        let (lo, hi) = (model.risk.rho_lo * volume, model.risk.rho_hi * volume);
        let slack = 1e-9 * volume.max(1.0);
        if v < lo - slack || v > hi + slack {
            return Err(AsrError::Constraint(format!(
                "rate {v} outside [{lo}, {hi}] on day {n}"
            )));
        }
        let dt = model.contract.dt;
        let traded = v * dt;
        let k = model.market.k_perm;
        let mut x = self.x + traded * s_next + model.trading_cost(traded, volume);
        if k > 0.0 {
            // Trades fill on average halfway through their own impact.
            x -= 0.5 * k * traded * traded;
        }
        if eps_prime != 0.0 {
            x -= model.market.sigma * v * dt.powf(1.5) / 3f64.sqrt() * eps_prime;
        }
        let m = n as f64;
        Ok(Self {
            n: n + 1,
            s: s_next,
            a: (m * self.a + s_next) / (m + 1.0),
            q: self.q + traded,
            x,
        })
    }
}
