//! Forward replay of a solved policy, Monte Carlo evaluation and realized
//! cost decomposition.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AsrError, Result};
use crate::impact::eps_prime;
use crate::model::{AsrModel, MarketState, EPSILONS, PROBS};
use crate::policy::{PolicyEngine, PolicyQuery};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// Same five-point law as the solver.
    #[default]
    Pentanomial,
    /// Standard normal innovations; off-model, for robustness checks.
    Gaussian,
}

/// Prices driving a replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PricePath {
    /// Observed closes `S_1, S_2, ...`.
    Prices(Vec<f64>),
    /// Innovations `eps_1, eps_2, ...` and the matching intraday noise. Prices
    /// follow from the model, including the permanent impact of the orders.
    Innovations { eps: Vec<f64>, eps_prime: Vec<f64> },
}

impl PricePath {
    /// Synthetic path number `index` of a seeded family.
    pub fn synthetic(days: usize, seed: u64, index: u64, generator: Generator) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let mut eps = Vec::with_capacity(days);
        let mut eps_p = Vec::with_capacity(days);
        match generator {
            Generator::Pentanomial => {
                let law = WeightedIndex::new(PROBS).expect("valid weights");
                for _ in 0..days {
                    let e = EPSILONS[law.sample(&mut rng)];
                    let t = EPSILONS[law.sample(&mut rng)];
                    eps.push(e);
                    eps_p.push(eps_prime(e, t));
                }
            }
            Generator::Gaussian => {
                for _ in 0..days {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    let t: f64 = StandardNormal.sample(&mut rng);
                    eps.push(e);
                    eps_p.push(eps_prime(e, t));
                }
            }
        }
        PricePath::Innovations { eps, eps_prime: eps_p }
    }

    /// Closes `s0 + slope * n`.
    pub fn linear(s0: f64, slope: f64, days: usize) -> Self {
        PricePath::Prices((1..=days).map(|n| s0 + slope * n as f64).collect())
    }

    fn len(&self) -> usize {
        match self {
            PricePath::Prices(p) => p.len(),
            PricePath::Innovations { eps, .. } => eps.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PricePath::Prices(p) => {
                if let Some((i, s)) = p.iter().enumerate().find(|(_, s)| !(s.is_finite() && **s > 0.0)) {
                    return Err(AsrError::InvalidParameter(format!("price {} on day {} is not positive", s, i + 1)));
                }
            }
            PricePath::Innovations { eps, eps_prime } => {
                if eps.len() != eps_prime.len() {
                    return Err(AsrError::InvalidParameter("eps and eps_prime differ in length".into()));
                }
                if eps.iter().chain(eps_prime).any(|x| !x.is_finite()) {
                    return Err(AsrError::InvalidParameter("innovations must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

/// One row per day of the replay, taken before the day's order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub day: usize,
    pub s: f64,
    pub a: f64,
    pub q: f64,
    /// Shares sent on this day (zero on the exercise day).
    pub order: f64,
    pub x: f64,
    pub exercised: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub rows: Vec<DayRecord>,
    pub n_star: usize,
    pub shares_delivered: f64,
    /// Cash spent, including the final purchase of the missing shares.
    pub total_cost: f64,
    /// Any state was outside the solved grids.
    pub extrapolated: bool,
}

impl SimulationResult {
    /// Bank's profit: notional received minus total cost.
    pub fn pnl(&self, model: &AsrModel) -> f64 {
        model.contract.notional - self.total_cost
    }

    pub fn final_row(&self) -> &DayRecord {
        self.rows.last().expect("a replay has at least one row")
    }
}

/// Replay the policy of `engine` along `path`.
pub fn simulate_path(engine: &PolicyEngine, path: &PricePath) -> Result<SimulationResult> {
    path.validate()?;
    let model = engine.cube().model();
    let days = model.contract.days;
    let dt = model.contract.dt;
    let noisy = engine.cube().meta.intraday_noise && model.market.k_perm > 0.0;
    let mut state = MarketState::initial(model);
    let mut rows = Vec::with_capacity(days + 1);
    let mut extrapolated = false;
    loop {
        let n = state.n;
        let ans = engine.answer(&PolicyQuery { n, s: state.s, q: state.q, a: state.a })?;
        extrapolated |= ans.extrapolated;
        if ans.exercise {
            rows.push(DayRecord {
                day: n,
                s: state.s,
                a: state.a,
                q: state.q,
                order: 0.0,
                x: state.x,
                exercised: true,
            });
            break;
        }
        if n >= path.len() {
            return Err(AsrError::InvalidParameter(format!(
                "price path has {} days but the replay needs day {}",
                path.len(),
                n + 1
            )));
        }
        rows.push(DayRecord {
            day: n,
            s: state.s,
            a: state.a,
            q: state.q,
            order: ans.order,
            x: state.x,
            exercised: false,
        });
        let v = ans.order / dt;
        state = match path {
            PricePath::Prices(p) => state.advance_to(model, v, p[n], 0.0)?,
            PricePath::Innovations { eps, eps_prime } => {
                state.step(model, v, eps[n], if noisy { eps_prime[n] } else { 0.0 })?
            }
        };
        if state.n > days {
            unreachable!("settlement is forced on the last day");
        }
    }
    let last = *rows.last().unwrap();
    let fe = model.effective_notional();
    let terminal = model.intrinsic_value(last.q, last.s, last.a)?;
    Ok(SimulationResult {
        n_star: last.day,
        shares_delivered: fe / last.a,
        total_cost: last.x + terminal + model.contract.notional - last.q * last.s,
        extrapolated,
        rows,
    })
}

/// Realized cost split into the four terms of the value decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostDecomposition {
    /// `sum_j (q_j - (j/n*) F/A_{n*}) (S_{j+1} - S_j)`.
    pub risk: f64,
    /// `(n/n*)(A - S) F/A_{n*}` at the start state.
    pub spread: f64,
    /// Execution costs paid on top of the closing prices.
    pub liquidity: f64,
    /// Cost of buying the missing shares at settlement on top of the close.
    pub post_exercise: f64,
    /// `-risk + spread + liquidity + post_exercise + F_e - F`.
    pub objective: f64,
}

/// Decompose a replay and check it against the realized cost.
///
/// The liquidity term is the sum of the realized costs paid over the closing
/// prices, which is `sum L(v/V) V dt` without permanent impact.
pub fn decompose_cost(model: &AsrModel, result: &SimulationResult) -> Result<CostDecomposition> {
    let rows = &result.rows;
    let first = rows.first().ok_or_else(|| AsrError::InvalidParameter("empty replay".into()))?;
    let last = result.final_row();
    let n_star = last.day;
    if first.day != 0 || n_star == 0 {
        return Err(AsrError::InvalidParameter("replay must start on day 0 and end after it".into()));
    }
    let fe = model.effective_notional();
    let f = model.contract.notional;
    let shares = fe / last.a;
    let ns = n_star as f64;

    let mut risk = 0.0;
    let mut liquidity = 0.0;
    let mut weighted = 0.0;
    for w in rows.windows(2) {
        let (r, next) = (&w[0], &w[1]);
        let j = r.day as f64;
        let ds = next.s - r.s;
        risk += (r.q - j / ns * shares) * ds;
        liquidity += next.x - r.x - (next.q - r.q) * next.s;
        weighted += j / ns * ds;
    }
    // Average-minus-price identity on the replayed path.
    let gap = last.a - last.s;
    let scale = last.s.abs().max(last.a.abs()).max(1.0);
    if (gap + weighted).abs() > 1e-8 * scale {
        return Err(AsrError::Numerical(format!(
            "path inconsistent with its average: A - S = {gap}, weighted innovations give {}",
            -weighted
        )));
    }
    let spread = first.day as f64 / ns * (first.a - first.s) * shares;
    let post_exercise = model.intrinsic_value(last.q, last.s, last.a)? - (fe * last.s / last.a - f);
    let objective = -risk + spread + liquidity + post_exercise + fe - f;
    let realized = result.total_cost - f;
    let tol = 1e-8 * f.max(result.total_cost.abs()).max(1.0);
    if (objective - realized).abs() > tol {
        return Err(AsrError::Numerical(format!(
            "decomposition sums to {objective} but the realized objective is {realized}"
        )));
    }
    Ok(CostDecomposition { risk, spread, liquidity, post_exercise, objective })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloOptions {
    pub n_paths: usize,
    pub seed: u64,
    pub generator: Generator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub n_paths: usize,
    pub seed: u64,
    pub generator: Generator,
    pub mean_cost: f64,
    pub std_cost: f64,
    /// `(level, total cost)` at 5, 25, 50, 75 and 95 percent.
    pub quantiles: Vec<(f64, f64)>,
    /// Paths settled on each day.
    pub exercise_histogram: BTreeMap<usize, usize>,
    /// Certainty equivalent of the bank's profit `F - total cost`.
    pub certainty_equivalent: f64,
    pub ce_std_error: f64,
    /// Value of the cube at the root, for comparison with `-certainty_equivalent`.
    pub pi: f64,
    pub extrapolated_paths: usize,
}

/// Replay `n_paths` synthetic paths.
pub fn monte_carlo(engine: &PolicyEngine, options: &MonteCarloOptions) -> Result<MonteCarloSummary> {
    if options.n_paths == 0 {
        return Err(AsrError::InvalidParameter("n_paths must be at least 1".into()));
    }
    let model = engine.cube().model();
    let days = model.contract.days;
    let results: Vec<SimulationResult> = (0..options.n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let path = PricePath::synthetic(days, options.seed, i, options.generator);
            simulate_path(engine, &path)
        })
        .collect::<Result<_>>()?;

    let f = model.contract.notional;
    let costs: Vec<f64> = results.iter().map(|r| r.total_cost).collect();
    let n = costs.len() as f64;
    let mean_cost = costs.iter().sum::<f64>() / n;
    let var = costs.iter().map(|c| (c - mean_cost).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let mut sorted = costs.clone();
    sorted.sort_by(f64::total_cmp);
    let quantiles = [0.05, 0.25, 0.5, 0.75, 0.95]
        .iter()
        .map(|&p| (p, sorted[((p * (n - 1.0)).round() as usize).min(sorted.len() - 1)]))
        .collect();
    let mut exercise_histogram = BTreeMap::new();
    for r in &results {
        *exercise_histogram.entry(r.n_star).or_insert(0) += 1;
    }

    let gamma = model.risk.gamma;
    let (ce_cost, ce_std_error) = if gamma == 0.0 {
        (mean_cost - f, var.sqrt() / n.sqrt())
    } else {
        // (1/gamma) log E exp(gamma (cost - F)), shifted by the largest cost.
        let top = sorted[sorted.len() - 1];
        let w: Vec<f64> = costs.iter().map(|c| (gamma * (c - top)).exp()).collect();
        let m = w.iter().sum::<f64>() / n;
        let vw = w.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        (m.ln() / gamma + top - f, vw.sqrt() / n.sqrt() / (gamma * m))
    };
    Ok(MonteCarloSummary {
        n_paths: options.n_paths,
        seed: options.seed,
        generator: options.generator,
        mean_cost,
        std_cost: var.sqrt(),
        quantiles,
        exercise_histogram,
        certainty_equivalent: -ce_cost,
        ce_std_error,
        pi: engine.cube().root_value()?,
        extrapolated_paths: results.iter().filter(|r| r.extrapolated).count(),
    })
}
