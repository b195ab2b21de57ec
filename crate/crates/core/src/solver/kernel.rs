//! Inner loop of the backward recursion on the pentanomial tree.
//!
//! For a fixed price node and average price the next-day values needed by
//! every inventory row are the same five columns (one per innovation) of the
//! next surface, evaluated at the five next averages. Those columns are built
//! once and shared by all rows. With `gamma > 0` the exponential of the
//! risk-adjusted sum factorises into an inventory part, a column part and a
//! cost part, so a candidate costs five multiply-adds and no `exp`.

use crate::cara::certainty_cost;
use crate::error::{AsrError, Result};
use crate::grid::Grids;
use crate::model::{AsrModel, EPSILONS, PROBS};
use crate::spline::SplineBasis;

use super::surface::DaySurface;

/// Order offsets (in inventory steps) admissible on one day, listed in
/// tie-break order `0, +1, -1, +2, -2, ...`, with their costs.
#[derive(Debug, Clone)]
pub(crate) struct Candidates {
    pub offsets: Vec<i64>,
    pub costs: Vec<f64>,
    pub exp_costs: Vec<f64>,
}

impl Candidates {
    pub fn for_day(model: &AsrModel, grids: &Grids, n: usize) -> Self {
        let (lo, hi) = model.order_bounds(n);
        let step = grids.q_step;
        let dlo = (lo / step - 1e-9).ceil() as i64;
        let dhi = (hi / step + 1e-9).floor() as i64;
        let mut offsets: Vec<i64> = (dlo..=dhi).collect();
        offsets.sort_by_key(|&d| (d.abs(), d < 0));
        let volume = model.market.volume.next(n);
        let gamma = model.risk.gamma;
        let costs: Vec<f64> =
            offsets.iter().map(|&d| model.trading_cost(d as f64 * step, volume)).collect();
        let exp_costs = costs.iter().map(|c| (gamma * c).exp()).collect();
        Self { offsets, costs, exp_costs }
    }
}

/// Per-inventory factors, shared by every day.
#[derive(Debug, Clone)]
pub(crate) struct RowTables {
    /// `q sigma sqrt(dt) eps`: the mark-to-market gain of holding `q`.
    pub gain: Vec<[f64; 5]>,
    /// `p exp(-gamma gain - shift)`.
    pub weight: Vec<[f64; 5]>,
    pub shift: Vec<f64>,
}

impl RowTables {
    pub fn new(model: &AsrModel, grids: &Grids) -> Self {
        let h = model.price_step();
        let gamma = model.risk.gamma;
        let mut gain = Vec::with_capacity(grids.n_q());
        let mut weight = Vec::with_capacity(grids.n_q());
        let mut shift = Vec::with_capacity(grids.n_q());
        for &q in &grids.q {
            let g: [f64; 5] = std::array::from_fn(|e| q * h * EPSILONS[e]);
            let s = 2.0 * gamma * q * h;
            gain.push(g);
            weight.push(std::array::from_fn(|e| PROBS[e] * (-gamma * g[e] - s).exp()));
            shift.push(s);
        }
        Self { gain, weight, shift }
    }
}

/// Best order for one inventory row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowChoice {
    /// Risk-adjusted cost of continuing optimally.
    pub value: f64,
    /// Target inventory index.
    pub target: usize,
    /// The shifted log-sum-exp path was needed.
    pub fallback: bool,
}

/// Everything a day of the recursion needs besides the next surface.
pub(crate) struct StepContext<'a> {
    pub model: &'a AsrModel,
    pub grids: &'a Grids,
    pub basis: &'a SplineBasis,
    pub rows: &'a RowTables,
    pub cand: Candidates,
    pub n: usize,
    /// Evaluate the next day against the stop-now value in closed form.
    pub closed_form_next: bool,
    pub direct: bool,
}

/// Scratch buffers of one worker.
pub(crate) struct Scratch {
    pub cols: Vec<f64>,
    pub exps: Vec<f64>,
}

impl Scratch {
    pub fn new(n_q: usize) -> Self {
        Self { cols: vec![0.0; 5 * n_q], exps: vec![0.0; 5 * n_q] }
    }
}

impl<'a> StepContext<'a> {
    pub fn new(
        model: &'a AsrModel,
        grids: &'a Grids,
        basis: &'a SplineBasis,
        rows: &'a RowTables,
        n: usize,
        closed_form_terminal: bool,
        direct: bool,
    ) -> Self {
        Self {
            model,
            grids,
            basis,
            rows,
            cand: Candidates::for_day(model, grids, n),
            n,
            closed_form_next: closed_form_terminal && n + 1 == model.contract.days,
            direct,
        }
    }

    /// Fill `cols[e * n_q + j]` with next-day values at target row `j` after
    /// innovation `EPSILONS[e]`, from tree node `zeta` with average `a`.
    /// `next_m(node)` yields the second derivatives of a next-day node block.
    /// Returns the number of averages that fell outside the grid.
    pub fn columns<'m>(
        &self,
        zeta: usize,
        a: f64,
        next: &DaySurface,
        next_m: impl Fn(usize) -> &'m [f64],
        cols: &mut [f64],
    ) -> u32 {
        let n_q = self.grids.n_q();
        let n_a = self.grids.n_a();
        let h = self.model.price_step();
        let s = self.model.market.s0 + h * (zeta as f64 - 2.0 * self.n as f64);
        let m = self.n as f64;
        let mut extrapolated = 0;
        for e in 0..5 {
            let s_next = s + h * EPSILONS[e];
            let a_next = (m * a + s_next) / (m + 1.0);
            let col = &mut cols[e * n_q..(e + 1) * n_q];
            if self.closed_form_next {
                for (c, &q) in col.iter_mut().zip(&self.grids.q) {
                    *c = self.model.intrinsic(q, s_next, a_next);
                }
                continue;
            }
            let w = self.basis.weights(a_next);
            extrapolated += u32::from(w.extrapolated);
            let child = zeta + e;
            let base = (child - next.node_offset) * n_q * n_a;
            let mb = next_m(child);
            for (j, c) in col.iter_mut().enumerate() {
                let row = j * n_a;
                *c = w.apply(&next.theta[base + row..base + row + n_a], &mb[row..row + n_a]);
            }
        }
        extrapolated
    }

    /// Turn columns into the exponential factors of the fast path and return
    /// their shift.
    pub fn prepare(&self, cols: &[f64], exps: &mut [f64]) -> f64 {
        let gamma = self.model.risk.gamma;
        if gamma == 0.0 || self.direct {
            return 0.0;
        }
        let top = cols.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let shift = gamma * top;
        for (x, &c) in exps.iter_mut().zip(cols) {
            *x = (gamma * c - shift).exp();
        }
        shift
    }

    /// Minimise over admissible targets from inventory row `q`.
    pub fn best(&self, q: usize, cols: &[f64], exps: &[f64], shift: f64) -> Result<RowChoice> {
        let n_q = self.grids.n_q();
        let gamma = self.model.risk.gamma;
        let mut best = f64::INFINITY;
        let mut target = usize::MAX;
        if gamma == 0.0 {
            for (k, &d) in self.cand.offsets.iter().enumerate() {
                let Some(j) = shifted(q, d, n_q) else { continue };
                let mut v = self.cand.costs[k];
                for e in 0..5 {
                    v += PROBS[e] * cols[e * n_q + j];
                }
                if v < best {
                    best = v;
                    target = j;
                }
            }
            return self.finish(q, best, target, false);
        }
        if !self.direct {
            let w = &self.rows.weight[q];
            for (k, &d) in self.cand.offsets.iter().enumerate() {
                let Some(j) = shifted(q, d, n_q) else { continue };
                let mut sum = 0.0;
                for e in 0..5 {
                    sum += w[e] * exps[e * n_q + j];
                }
                let key = sum * self.cand.exp_costs[k];
                if key < best {
                    best = key;
                    target = j;
                }
            }
            if target == usize::MAX {
                return self.finish(q, best, target, false);
            }
            if best.is_finite() && best > 1e-280 {
                let value = (best.ln() + shift + self.rows.shift[q]) / gamma;
                return self.finish(q, value, target, false);
            }
            best = f64::INFINITY;
            target = usize::MAX;
        }
        let g = &self.rows.gain[q];
        let mut y = [0.0; 5];
        for (k, &d) in self.cand.offsets.iter().enumerate() {
            let Some(j) = shifted(q, d, n_q) else { continue };
            for e in 0..5 {
                y[e] = self.cand.costs[k] + cols[e * n_q + j] - g[e];
            }
            let v = certainty_cost(gamma, &PROBS, &y);
            if v < best {
                best = v;
                target = j;
            }
        }
        self.finish(q, best, target, !self.direct)
    }

    fn finish(&self, q: usize, value: f64, target: usize, fallback: bool) -> Result<RowChoice> {
        if target == usize::MAX {
            return Err(AsrError::Configuration(format!(
                "no admissible target inventory on day {} from q = {} (grid row {q}); \
                 widen the inventory grid or the participation bounds",
                self.n, self.grids.q[q]
            )));
        }
        if !value.is_finite() {
            return Err(AsrError::Numerical(format!(
                "non-finite continuation value on day {} at q = {}",
                self.n, self.grids.q[q]
            )));
        }
        Ok(RowChoice { value, target, fallback })
    }
}

#[inline]
fn shifted(q: usize, d: i64, n_q: usize) -> Option<usize> {
    let j = q as i64 + d;
    (j >= 0 && (j as usize) < n_q).then_some(j as usize)
}
