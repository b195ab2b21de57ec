//! Policy lookups at arbitrary states, for replays and the live service.
//!
//! Inventory snaps to the nearest grid row. For tree cubes the continuation
//! is recomputed at the exact average price on the two tree nodes around the
//! price and interpolated linearly in price, together with the target
//! inventory. Impact cubes evaluate the continuation at the exact price.
//! The stop-now value always uses the actual state.

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, AsrError, Result};
use crate::impact::{bicubic_data, BicubicData, BicubicDay, ImpactStep};
use crate::model::MarketState;
use crate::solver::{CubeKind, CubeMeta, PolicyCube, RowChoice, RowTables, Scratch, StepContext};
use crate::spline::SplineBasis;

/// State at which a recommendation is requested.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyQuery {
    pub n: usize,
    pub s: f64,
    pub q: f64,
    pub a: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyAnswer {
    /// Shares to trade over the next day (zero once exercising).
    pub order: f64,
    pub exercise: bool,
    pub theta: f64,
    pub intrinsic: f64,
    pub continuation: f64,
    /// The state lies outside the solved grids and values are extrapolated.
    pub extrapolated: bool,
}

/// What-if step: apply `order` and innovation `eps` from `state`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreviewRequest {
    pub state: MarketState,
    pub order: f64,
    pub eps: f64,
    #[serde(default)]
    pub eps_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreviewAnswer {
    pub state: MarketState,
    /// Recommendation at the new state; absent after the last day.
    pub policy: Option<PolicyAnswer>,
}

/// Cube description served to clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeSummary {
    pub meta: CubeMeta,
    pub pi: f64,
    pub pi_over_f: f64,
    pub exercise_days: Vec<usize>,
    pub q_step: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub complete: bool,
}

/// How far outside the grids a query may go before it is refused, in units
/// of the respective grid steps (price: tree steps).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LookupMargins {
    pub price_steps: f64,
    pub average_steps: f64,
    pub inventory_steps: f64,
}

impl Default for LookupMargins {
    fn default() -> Self {
        Self { price_steps: 4.0, average_steps: 10.0, inventory_steps: 1.0 }
    }
}

/// Read-only policy evaluator over a complete cube.
pub struct PolicyEngine {
    cube: Arc<PolicyCube>,
    basis: SplineBasis,
    rows: RowTables,
    margins: LookupMargins,
    tree_m: Vec<Vec<OnceLock<Vec<f64>>>>,
    impact: Vec<OnceLock<BicubicData>>,
}

impl PolicyEngine {
    pub fn new(cube: Arc<PolicyCube>) -> Result<Self> {
        if !cube.is_complete() {
            return Err(AsrError::Format(
                "policy lookups need every day of the cube; solve with full retention".into(),
            ));
        }
        let basis = SplineBasis::new(cube.grids.a.clone())?;
        let rows = RowTables::new(cube.model(), &cube.grids);
        let tree_m = cube
            .days
            .iter()
            .map(|d| (0..d.as_ref().map_or(0, |d| d.n_nodes)).map(|_| OnceLock::new()).collect())
            .collect();
        let impact = cube.days.iter().map(|_| OnceLock::new()).collect();
        Ok(Self { cube, basis, rows, margins: LookupMargins::default(), tree_m, impact })
    }

    pub fn with_margins(mut self, margins: LookupMargins) -> Self {
        self.margins = margins;
        self
    }

    pub fn cube(&self) -> &PolicyCube {
        &self.cube
    }

    pub fn summary(&self) -> Result<CubeSummary> {
        let cube = &*self.cube;
        let pi = cube.root_value()?;
        let f = cube.model().contract.notional;
        Ok(CubeSummary {
            meta: cube.meta.clone(),
            pi,
            pi_over_f: if f > 0.0 { pi / f } else { 0.0 },
            exercise_days: cube.model().contract.exercise_days(),
            q_step: cube.grids.q_step,
            a_min: cube.grids.a[0],
            a_max: *cube.grids.a.last().unwrap(),
            complete: cube.is_complete(),
        })
    }

    fn tree_m(&self, day: usize, node: usize) -> &[f64] {
        self.tree_m[day][node].get_or_init(|| {
            let d = self.cube.days[day].as_ref().expect("complete cube");
            let n_a = d.n_a;
            let block = d.block();
            let y = &d.theta[node * block..(node + 1) * block];
            let mut m = vec![0.0; block];
            for (mr, yr) in m.chunks_mut(n_a).zip(y.chunks(n_a)) {
                self.basis.second_derivatives(yr, mr);
            }
            m
        })
    }

    fn impact_data(&self, day: usize) -> Result<&BicubicData> {
        if let Some(d) = self.impact[day].get() {
            return Ok(d);
        }
        let data = bicubic_data(&self.cube.grids, self.cube.day(day)?, &self.basis)?;
        Ok(self.impact[day].get_or_init(|| data))
    }

    fn tree_continuation(&self, n: usize, zeta: usize, q: usize, a: f64) -> Result<RowChoice> {
        let cube = &*self.cube;
        let next = cube.day(n + 1)?;
        let ctx = StepContext::new(
            cube.model(),
            &cube.grids,
            &self.basis,
            &self.rows,
            n,
            cube.meta.grid.closed_form_terminal,
            false,
        );
        let mut scratch = Scratch::new(cube.grids.n_q());
        ctx.columns(zeta, a, next, |c| self.tree_m(n + 1, c), &mut scratch.cols);
        let shift = ctx.prepare(&scratch.cols, &mut scratch.exps);
        ctx.best(q, &scratch.cols, &scratch.exps, shift)
    }

    fn impact_continuation(&self, n: usize, s: f64, q: usize, a: f64) -> Result<RowChoice> {
        let cube = &*self.cube;
        let next = cube.day(n + 1)?;
        let data = self.impact_data(n + 1)?;
        let step = ImpactStep::new(
            cube.model(),
            &cube.grids,
            &self.basis,
            &self.rows,
            n,
            cube.meta.grid.closed_form_terminal,
            cube.meta.intraday_noise,
        );
        let mut scratch = step.scratch();
        step.continuation(s, a, q, &BicubicDay { day: next, data }, &mut scratch)
    }

    /// Price range covered on day `n`.
    fn envelope(&self, n: usize) -> (f64, f64) {
        let cube = &*self.cube;
        let model = cube.model();
        match (cube.meta.kind, cube.grids.s.as_ref()) {
            (CubeKind::Impact, Some(sg)) => {
                let (lo, hi) = sg.day_range(n, model.contract.days);
                (sg.values[lo], sg.values[hi])
            }
            _ => {
                let h = model.price_step();
                let s0 = model.market.s0;
                (s0 - 2.0 * n as f64 * h, s0 + 2.0 * n as f64 * h)
            }
        }
    }

    pub fn answer(&self, query: &PolicyQuery) -> Result<PolicyAnswer> {
        let cube = &*self.cube;
        let model = cube.model();
        let grids = &cube.grids;
        let days = model.contract.days;
        ensure_finite("S", query.s)?;
        ensure_finite("q", query.q)?;
        ensure_finite("A", query.a)?;
        let n = query.n;
        if n > days {
            return Err(AsrError::OutOfGrid(format!("day {n} is after maturity {days}")));
        }
        let intrinsic = model.intrinsic_value(query.q, query.s, query.a)?;

        let h = model.price_step();
        let (s_lo, s_hi) = self.envelope(n);
        let (a_lo, a_hi) = (grids.a[0], *grids.a.last().unwrap());
        let q_max = *grids.q.last().unwrap();
        let m = &self.margins;
        let outside = |x: f64, lo: f64, hi: f64| (lo - x).max(x - hi).max(0.0);
        let ds = outside(query.s, s_lo, s_hi);
        let da = outside(query.a, a_lo, a_hi);
        let dq = outside(query.q, 0.0, q_max);
        if ds > m.price_steps * h || da > m.average_steps * grids.a_step || dq > m.inventory_steps * grids.q_step {
            return Err(AsrError::OutOfGrid(format!(
                "state (n={n}, S={}, q={}, A={}) is too far outside the solved grids",
                query.s, query.q, query.a
            )));
        }
        let mut extrapolated = ds > 0.0 || da > 0.0 || dq > 0.0;

        if n == days {
            return Ok(PolicyAnswer {
                order: 0.0,
                exercise: true,
                theta: intrinsic,
                intrinsic,
                continuation: intrinsic,
                extrapolated,
            });
        }

        let q_row = grids.nearest_q(query.q);
        let (continuation, target) = match cube.meta.kind {
            CubeKind::Impact => {
                let c = self.impact_continuation(n, query.s, q_row, query.a)?;
                (c.value, grids.q[c.target])
            }
            CubeKind::Tree => {
                let (zeta, t) = if n == 0 {
                    extrapolated |= query.s != model.market.s0;
                    (0, 0.0)
                } else if h == 0.0 {
                    (2 * n, 0.0)
                } else {
                    let pos = (query.s - model.market.s0) / h + 2.0 * n as f64;
                    let zeta = (pos.floor().max(0.0) as usize).min(4 * n - 1);
                    (zeta, pos - zeta as f64)
                };
                let lo = self.tree_continuation(n, zeta, q_row, query.a)?;
                if t == 0.0 {
                    (lo.value, grids.q[lo.target])
                } else {
                    let hi = self.tree_continuation(n, zeta + 1, q_row, query.a)?;
                    (
                        (1.0 - t) * lo.value + t * hi.value,
                        (1.0 - t) * grids.q[lo.target] + t * grids.q[hi.target],
                    )
                }
            }
        };

        let exercise = model.contract.exercise_flags()[n] && intrinsic <= continuation;
        let (lo, hi) = model.order_bounds(n);
        let order = if exercise { 0.0 } else { (target - query.q).clamp(lo, hi) };
        Ok(PolicyAnswer {
            order,
            exercise,
            theta: if exercise { intrinsic } else { continuation },
            intrinsic,
            continuation,
            extrapolated,
        })
    }

    /// Apply an order and innovation to a state and look up the policy there.
    pub fn preview(&self, req: &PreviewRequest) -> Result<PreviewAnswer> {
        let model = self.cube.model();
        let v = req.order / model.contract.dt;
        let state = req.state.step(model, v, req.eps, req.eps_prime)?;
        let policy = if state.n <= model.contract.days {
            Some(self.answer(&PolicyQuery { n: state.n, s: state.s, q: state.q, a: state.a })?)
        } else {
            None
        };
        Ok(PreviewAnswer { state, policy })
    }
}
