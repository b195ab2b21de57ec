//! Indifference price and maximum discount.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{AsrError, Result};
use crate::grid::GridSpec;
use crate::impact::{solve_with_impact, ImpactOptions};
use crate::model::AsrModel;
use crate::solver::{solve, CubeKind, PolicyCube, Retain, SolverOptions};

/// Solve with the tree solver, or with the impact solver when permanent
/// impact is set.
pub fn solve_model(
    model: &AsrModel,
    spec: &GridSpec,
    retain: Retain,
    intraday_noise: bool,
) -> Result<PolicyCube> {
    if model.market.k_perm != 0.0 {
        solve_with_impact(model, spec, &ImpactOptions { retain, intraday_noise })
    } else {
        solve(model, spec, &SolverOptions { retain, ..SolverOptions::default() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceReport {
    pub pi: f64,
    pub pi_over_f: f64,
    pub notional: f64,
    pub days: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub eta: f64,
    pub rho_lo: f64,
    pub rho_hi: f64,
    pub discount: f64,
    pub kind: CubeKind,
    pub grid: GridSpec,
    pub extrapolated_fraction: f64,
    pub fallback_nodes: u64,
    pub wall_time_secs: f64,
}

impl PriceReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "pi: {:.2}", self.pi);
        let _ = writeln!(s, "pi_over_f: {:.6}%", 100.0 * self.pi_over_f);
        let _ = writeln!(s, "notional: {}", self.notional);
        let _ = writeln!(s, "days: {}", self.days);
        let _ = writeln!(s, "gamma: {:e}", self.gamma);
        let _ = writeln!(s, "sigma: {}", self.sigma);
        let _ = writeln!(s, "eta: {}", self.eta);
        let _ = writeln!(s, "rho: [{}, {}]", self.rho_lo, self.rho_hi);
        let _ = writeln!(s, "discount: {}", self.discount);
        let _ = writeln!(s, "solver: {:?}", self.kind);
        let g = &self.grid;
        let _ = writeln!(s, "grid: n_q={} n_a={} q_max={} xi={}", g.n_q, g.n_a, g.q_max, g.xi);
        if let Some(n_s) = g.n_s {
            let _ = writeln!(s, "grid_n_s: {n_s}");
        }
        let _ = writeln!(s, "extrapolated_fraction: {:.4}", self.extrapolated_fraction);
        let _ = writeln!(s, "fallback_nodes: {}", self.fallback_nodes);
        let _ = writeln!(s, "wall_time_secs: {:.2}", self.wall_time_secs);
        s
    }
}

/// Price report from a solved cube (any retention).
pub fn indifference_price(cube: &PolicyCube) -> Result<PriceReport> {
    let model = cube.model();
    let pi = cube.root_value()?;
    let f = model.contract.notional;
    Ok(PriceReport {
        pi,
        pi_over_f: if f > 0.0 { pi / f } else { 0.0 },
        notional: f,
        days: model.contract.days,
        gamma: model.risk.gamma,
        sigma: model.market.sigma,
        eta: model.market.eta,
        rho_lo: model.risk.rho_lo,
        rho_hi: model.risk.rho_hi,
        discount: model.contract.discount,
        kind: cube.meta.kind,
        grid: cube.meta.grid.clone(),
        extrapolated_fraction: cube.stats.extrapolated_fraction(),
        fallback_nodes: cube.stats.fallback_nodes,
        wall_time_secs: cube.stats.wall_time_secs,
    })
}

/// Solve root-only and report the price.
pub fn price(model: &AsrModel, spec: &GridSpec, intraday_noise: bool) -> Result<PriceReport> {
    let started = Instant::now();
    let cube = solve_model(model, spec, Retain::RootOnly, intraday_noise)?;
    let mut report = indifference_price(&cube)?;
    report.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscountOptions {
    pub tol_beta: f64,
    /// First upper bracket, doubled until the price turns positive.
    pub beta_start: f64,
    pub beta_cap: f64,
    pub intraday_noise: bool,
}

impl Default for DiscountOptions {
    fn default() -> Self {
        Self { tol_beta: 1e-4, beta_start: 0.01, beta_cap: 0.5, intraday_noise: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscountReport {
    pub beta_star: f64,
    pub bracket: (f64, f64),
    /// Every evaluated `(beta, pi)` in evaluation order.
    pub trace: Vec<(f64, f64)>,
    /// The price at the cap was still negative.
    pub hit_cap: bool,
    pub notional: f64,
    pub wall_time_secs: f64,
}

impl DiscountReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "beta_star: {:.6}", self.beta_star);
        let _ = writeln!(s, "bracket: [{:.6}, {:.6}]", self.bracket.0, self.bracket.1);
        let _ = writeln!(s, "hit_cap: {}", self.hit_cap);
        for (b, p) in &self.trace {
            let _ = writeln!(s, "trace: beta={b:.6} pi={p:.2}");
        }
        let _ = writeln!(s, "wall_time_secs: {:.2}", self.wall_time_secs);
        s
    }
}

/// Largest discount on the average price the bank can grant, located as the
/// zero of the price as a function of the discount.
pub fn max_discount(model: &AsrModel, spec: &GridSpec, options: &DiscountOptions) -> Result<DiscountReport> {
    if !(options.tol_beta > 0.0 && options.tol_beta.is_finite()) {
        return Err(AsrError::InvalidParameter(format!("tol_beta must be positive, got {}", options.tol_beta)));
    }
    if !(options.beta_start > 0.0 && options.beta_start <= options.beta_cap && options.beta_cap < 1.0) {
        return Err(AsrError::InvalidParameter(format!(
            "need 0 < beta_start <= beta_cap < 1, got {} and {}",
            options.beta_start, options.beta_cap
        )));
    }
    let started = Instant::now();
    let mut trace = Vec::new();
    let mut eval = |beta: f64| -> Result<f64> {
        let mut m = model.clone();
        m.contract.discount = beta;
        let pi = solve_model(&m, spec, Retain::RootOnly, options.intraday_noise)?.root_value()?;
        log::info!("discount {beta:.6}: pi = {pi:.2}");
        trace.push((beta, pi));
        Ok(pi)
    };
    let done = |beta_star, bracket, trace: Vec<(f64, f64)>, hit_cap| {
        check_monotone(&trace)?;
        Ok(DiscountReport {
            beta_star,
            bracket,
            trace,
            hit_cap,
            notional: model.contract.notional,
            wall_time_secs: started.elapsed().as_secs_f64(),
        })
    };

    let p0 = eval(0.0)?;
    // Without a notional the price is zero up to round-off for every discount.
    if p0 >= 0.0 || model.contract.notional == 0.0 {
        if p0 > 0.0 {
            log::warn!("the price without discount is already positive ({p0:.2}); no discount is affordable");
        }
        return done(0.0, (0.0, 0.0), trace, false);
    }
    let mut lo = 0.0;
    let mut hi = options.beta_start;
    let mut hit_cap = false;
    loop {
        if eval(hi)? > 0.0 {
            break;
        }
        lo = hi;
        if hi >= options.beta_cap {
            hit_cap = true;
            log::warn!("price still negative at the discount cap {}", options.beta_cap);
            return done(hi, (lo, hi), trace, hit_cap);
        }
        hi = (2.0 * hi).min(options.beta_cap);
    }
    while hi - lo > options.tol_beta {
        let mid = 0.5 * (lo + hi);
        if eval(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    done(0.5 * (lo + hi), (lo, hi), trace, hit_cap)
}

/// Model parameter varied by a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Eta,
    Phi,
    Psi,
    Sigma,
    Gamma,
    RhoLo,
    RhoHi,
    KPerm,
    Notional,
    Discount,
}

impl SweepParam {
    /// Copy of `model` with the parameter set to `value`, validated.
    pub fn apply(self, model: &AsrModel, value: f64) -> Result<AsrModel> {
        let mut m = model.clone();
        match self {
            SweepParam::Eta => m.market.eta = value,
            SweepParam::Phi => m.market.phi = value,
            SweepParam::Psi => m.market.psi = value,
            SweepParam::Sigma => m.market.sigma = value,
            SweepParam::Gamma => m.risk.gamma = value,
            SweepParam::RhoLo => m.risk.rho_lo = value,
            SweepParam::RhoHi => m.risk.rho_hi = value,
            SweepParam::KPerm => m.market.k_perm = value,
            SweepParam::Notional => m.contract.notional = value,
            SweepParam::Discount => m.contract.discount = value,
        }
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub pi: f64,
    pub pi_over_f: f64,
    pub wall_time_secs: f64,
}

/// Price the contract for each value of one parameter.
pub fn sweep(
    model: &AsrModel,
    spec: &GridSpec,
    param: SweepParam,
    values: &[f64],
    intraday_noise: bool,
) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&value| {
            let r = price(&param.apply(model, value)?, spec, intraday_noise)?;
            log::info!("{param:?} = {value}: pi/F = {:.4}%", 100.0 * r.pi_over_f);
            Ok(SweepPoint { value, pi: r.pi, pi_over_f: r.pi_over_f, wall_time_secs: r.wall_time_secs })
        })
        .collect()
}

fn check_monotone(trace: &[(f64, f64)]) -> Result<()> {
    let mut sorted = trace.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    for w in sorted.windows(2) {
        if w[1].1 < w[0].1 {
            return Err(AsrError::Numerical(format!(
                "price decreases with the discount between {} ({}) and {} ({}); refine the grids",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    Ok(())
}
