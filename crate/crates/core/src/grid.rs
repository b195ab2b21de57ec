//! Inventory, average-price and (for the permanent-impact solver) price grids,
//! plus the indexing of the pentanomial price tree.

use serde::{Deserialize, Serialize};

use crate::error::{AsrError, Result};
use crate::model::{AsrModel, ContractSpec, MarketParams};

/// Numerical-method parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Number of inventory points.
    pub n_q: usize,
    /// Number of average-price points (at least 4).
    pub n_a: usize,
    /// Top of the inventory grid (shares).
    pub q_max: f64,
    /// Width of the average-price grid in units of `sigma sqrt(N dt)`.
    pub xi: f64,
    /// Number of price points for the permanent-impact solver.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_s: Option<usize>,
    /// Evaluate the last continuation step against the closed-form terminal
    /// value instead of its spline.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub closed_form_terminal: bool,
}

impl GridSpec {
    pub fn validate(&self, contract: &ContractSpec, market: &MarketParams) -> Result<()> {
        if self.n_q < 2 {
            return Err(AsrError::Configuration(format!("n_q must be at least 2, got {}", self.n_q)));
        }
        if self.n_a < 4 {
            return Err(AsrError::Configuration(format!(
                "n_a must be at least 4 for cubic splines, got {}",
                self.n_a
            )));
        }
        if !(self.q_max.is_finite() && self.q_max > 0.0) {
            return Err(AsrError::Configuration(format!("q_max must be positive, got {}", self.q_max)));
        }
        if !(self.xi.is_finite() && self.xi > 0.0) {
            return Err(AsrError::Configuration(format!("xi must be positive, got {}", self.xi)));
        }
        let lower = self.a_lower_edge(contract, market);
        if lower <= 0.0 {
            return Err(AsrError::Configuration(format!(
                "average-price grid reaches non-positive prices (lower edge {lower}); reduce xi"
            )));
        }
        Ok(())
    }

    pub fn a_half_width(&self, contract: &ContractSpec, market: &MarketParams) -> f64 {
        0.5 * self.xi * market.sigma * (contract.days as f64 * contract.dt).sqrt()
    }

    pub fn a_lower_edge(&self, contract: &ContractSpec, market: &MarketParams) -> f64 {
        market.s0 - self.a_half_width(contract, market)
    }
}

/// Natural choice of `q_max`: the delivery at the lowest grid average.
pub fn heuristic_q_max(contract: &ContractSpec, market: &MarketParams, xi: f64) -> f64 {
    let lower = market.s0 - 0.5 * xi * market.sigma * (contract.days as f64 * contract.dt).sqrt();
    contract.notional / (contract.discount.mul_add(-1.0, 1.0) * lower)
}

/// Uniform price grid of the permanent-impact solver, aligned with tree prices.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceGrid {
    pub values: Vec<f64>,
    pub step: f64,
    /// Index of S0.
    pub center: usize,
    /// Grid steps reserved above the tree envelope for cumulative drift.
    pub drift_steps: usize,
    pub pad_lo: usize,
    pub pad_hi: usize,
}

impl PriceGrid {
    /// Index range `[lo, hi]` that can hold reachable prices on day `n`.
    pub fn day_range(&self, n: usize, days: usize) -> (usize, usize) {
        let lo = 2 * (days - n.min(days));
        let hi = self.center + 2 * n + self.drift_steps + self.pad_hi;
        (lo, hi.min(self.values.len() - 1))
    }
}

/// The grids a solve runs on.
#[derive(Debug, Clone, PartialEq)]
pub struct Grids {
    pub q: Vec<f64>,
    pub q_step: f64,
    pub a: Vec<f64>,
    pub a_step: f64,
    pub s: Option<PriceGrid>,
    pub warnings: Vec<String>,
}

impl Grids {
    pub fn n_q(&self) -> usize {
        self.q.len()
    }

    pub fn n_a(&self) -> usize {
        self.a.len()
    }

    /// Nearest inventory row.
    pub fn nearest_q(&self, q: f64) -> usize {
        let k = (q / self.q_step).round();
        k.clamp(0.0, (self.q.len() - 1) as f64) as usize
    }
}

/// Build the uniform inventory and average grids (and the price grid when
/// `n_s` is set).
pub fn build_grids(spec: &GridSpec, model: &AsrModel) -> Result<Grids> {
    let contract = &model.contract;
    let market = &model.market;
    spec.validate(contract, market)?;

    let last_q = (spec.n_q - 1) as f64;
    let q: Vec<f64> = (0..spec.n_q).map(|k| k as f64 / last_q * spec.q_max).collect();
    let q_step = spec.q_max / last_q;

    let mut width = 2.0 * spec.a_half_width(contract, market);
    if width == 0.0 && market.sigma == 0.0 {
        // Without volatility the average never leaves S0; any grid around it is exact.
        width = 0.02 * market.s0;
    }
    let last_a = (spec.n_a - 1) as f64;
    let a: Vec<f64> = (0..spec.n_a)
        .map(|k| market.s0 + width * (k as f64 / last_a - 0.5))
        .collect();
    let a_step = width / last_a;
    if a_step <= 0.0 {
        return Err(AsrError::Configuration(
            "average-price grid is degenerate; use a positive width".into(),
        ));
    }

    let mut warnings = Vec::new();
    if let Some(volume) = market.volume.constant() {
        let vdt = volume * contract.dt;
        for (name, rho) in [("rho_hi", model.risk.rho_hi), ("rho_lo", model.risk.rho_lo)] {
            if rho == 0.0 {
                continue;
            }
            let ratio = (rho * vdt).abs() / q_step;
            if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
                let msg = format!(
                    "{name} * V * dt = {} is not a multiple of the inventory step {q_step}",
                    rho * vdt
                );
                log::warn!("{msg}");
                warnings.push(msg);
            }
        }
    }

    let s = match spec.n_s {
        Some(n_s) => Some(build_price_grid(n_s, spec.q_max, model)?),
        None => None,
    };

    Ok(Grids { q, q_step, a, a_step, s, warnings })
}

fn build_price_grid(n_s: usize, q_max: f64, model: &AsrModel) -> Result<PriceGrid> {
    let step = model.price_step();
    if step <= 0.0 {
        return Err(AsrError::Configuration(
            "the price grid needs a positive volatility".into(),
        ));
    }
    let days = model.contract.days;
    let drift = model.market.k_perm * q_max;
    let drift_steps = (drift / step - 1e-9).ceil().max(0.0) as usize;
    let needed = 4 * days + 1 + drift_steps;
    if n_s < needed {
        return Err(AsrError::Configuration(format!(
            "price grid too narrow: n_s = {n_s} but the tree envelope plus drift headroom needs \
             n_s >= {needed}; widen n_s"
        )));
    }
    let pad = n_s - needed;
    let pad_lo = pad / 2;
    let pad_hi = pad - pad_lo;
    let center = 2 * days + pad_lo;
    let s0 = model.market.s0;
    let values = (0..n_s).map(|i| s0 + step * (i as f64 - center as f64)).collect();
    Ok(PriceGrid { values, step, center, drift_steps, pad_lo, pad_hi })
}

/// Node of the pentanomial tree: day `n`, level `zeta` in `0..=4n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeIndex {
    pub n: usize,
    pub zeta: usize,
}

impl TreeIndex {
    pub fn new(n: usize, zeta: usize) -> Result<Self> {
        if zeta > 4 * n {
            return Err(AsrError::Configuration(format!("level {zeta} outside 0..={} on day {n}", 4 * n)));
        }
        Ok(Self { n, zeta })
    }

    /// Price at this node.
    pub fn price(&self, s0: f64, price_step: f64) -> f64 {
        s0 + price_step * (self.zeta as f64 - 2.0 * self.n as f64)
    }

    /// Child reached with innovation `eps`.
    pub fn child(&self, eps: i8) -> TreeIndex {
        TreeIndex { n: self.n + 1, zeta: (self.zeta as i64 + i64::from(eps) + 2) as usize }
    }

    pub fn nodes_on_day(n: usize) -> usize {
        4 * n + 1
    }
}

/// Grid of the reference case.
pub mod fixtures {
    use super::*;

    pub fn reference_grid() -> GridSpec {
        GridSpec { n_q: 201, n_a: 21, q_max: 2.5e7, xi: 3.0, n_s: None, closed_form_terminal: false }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::reference_grid;
    use super::*;
    use crate::model::fixtures::reference;
    use approx::assert_relative_eq;

    #[test]
    fn reference_grids() {
        let m = reference();
        let g = build_grids(&reference_grid(), &m).unwrap();
        assert_eq!(g.a.len(), 21);
        let half = 1.5 * 0.6 * 63f64.sqrt();
        assert_relative_eq!(half, 7.1435, max_relative = 1e-4);
        assert_relative_eq!(g.a[0], 45.0 - half, max_relative = 1e-14);
        assert_relative_eq!(g.a[20], 45.0 + half, max_relative = 1e-14);
        assert_relative_eq!(g.a_step, 0.71435, max_relative = 1e-4);
        assert_eq!(g.q.len(), 201);
        assert_eq!(g.q[0], 0.0);
        assert_eq!(g.q[200], 2.5e7);
        assert_eq!(g.q_step, 125_000.0);
        assert!(g.warnings.is_empty());
    }

    #[test]
    fn heuristic_inventory_cap() {
        let m = reference();
        let q = heuristic_q_max(&m.contract, &m.market, 3.0);
        assert_relative_eq!(q, 9.0e8 / (45.0 - 1.5 * 0.6 * 63f64.sqrt()), max_relative = 1e-14);
        assert_relative_eq!(q, 2.377e7, max_relative = 1e-3);
    }

    #[test]
    fn misaligned_inventory_step_warns() {
        let m = reference();
        let spec = GridSpec { n_q: 200, ..reference_grid() };
        let g = build_grids(&spec, &m).unwrap();
        assert_eq!(g.warnings.len(), 2);
    }

    #[test]
    fn rejects_bad_specs() {
        let m = reference();
        let bad_a = GridSpec { n_a: 3, ..reference_grid() };
        assert!(matches!(build_grids(&bad_a, &m), Err(AsrError::Configuration(_))));
        let wide = GridSpec { xi: 20.0, ..reference_grid() };
        assert!(matches!(build_grids(&wide, &m), Err(AsrError::Configuration(_))));
        let bad_q = GridSpec { n_q: 1, ..reference_grid() };
        assert!(build_grids(&bad_q, &m).is_err());
    }

    #[test]
    fn price_grid_alignment() {
        let mut m = reference();
        let spec = GridSpec { n_s: Some(253), ..reference_grid() };
        let g = build_grids(&spec, &m).unwrap();
        let s = g.s.unwrap();
        assert_eq!(s.center, 126);
        assert_eq!(s.values[126], 45.0);
        assert_eq!(s.day_range(0, 63), (126, 126));
        assert_eq!(s.day_range(63, 63), (0, 252));

        m.market.k_perm = 1e-7;
        assert!(matches!(build_grids(&spec, &m), Err(AsrError::Configuration(_))));
        let spec = GridSpec { n_s: Some(253 + 5), ..reference_grid() };
        let s = build_grids(&spec, &m).unwrap().s.unwrap();
        assert_eq!(s.drift_steps, 5);
    }

    #[test]
    fn tree_children() {
        let node = TreeIndex::new(3, 7).unwrap();
        assert_eq!(node.child(-2).zeta, 7);
        assert_eq!(node.child(2).zeta, 11);
        assert_relative_eq!(node.price(45.0, 0.6), 45.0 + 0.6, max_relative = 1e-15);
        assert!(TreeIndex::new(1, 5).is_err());
    }
}
