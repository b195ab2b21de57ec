//! Recursion with linear permanent impact: trading `v` moves the price by
//! `k v dt`, so prices leave the tree and the value function lives on a
//! uniform price grid, interpolated in both price and average.
//!
//! Trades fill evenly through the day while the payoff averages closing
//! prices. The resulting execution noise is correlated with the closing
//! innovation and can be switched off (`intraday_noise = false`), in which
//! case `k = 0` reproduces the tree recursion exactly.

mod bicubic;
mod law;

use std::time::Instant;

use rayon::prelude::*;

use crate::cara::certainty_cost;
use crate::error::{AsrError, Result};
use crate::grid::{build_grids, GridSpec, Grids};
use crate::model::{AsrModel, EPSILONS, PROBS};
use crate::solver::{
    CubeKind, CubeMeta, DaySurface, PolicyCube, Retain, RowChoice, RowTables, SolveStats,
    FORMAT_VERSION,
};
use crate::solver::kernel_candidates as candidates;
use crate::spline::SplineBasis;

pub use bicubic::{BicubicData, BicubicDay};
pub use law::{eps_prime, joint_innovation_support, joint_moment, JointInnovation, QuadraticSurd};

#[derive(Debug, Clone)]
pub struct ImpactOptions {
    pub retain: Retain,
    /// Model the intraday execution noise of trading through the day against
    /// closing prices.
    pub intraday_noise: bool,
}

impl Default for ImpactOptions {
    fn default() -> Self {
        Self { retain: Retain::Full, intraday_noise: true }
    }
}

/// Per-candidate constants of one day.
struct ImpactCandidates {
    offsets: Vec<i64>,
    /// Shares traded.
    traded: Vec<f64>,
    /// Price shift from permanent impact.
    drift: Vec<f64>,
    /// `cost - (k/2) traded^2 + log M(-gamma c / 2) / gamma`.
    base: Vec<f64>,
    /// Loading of the closing innovation through the execution noise,
    /// `c sqrt(3)/2` with `c = sigma v dt^{3/2} / sqrt(3)`.
    noise_load: Vec<f64>,
    /// `exp(-gamma noise_load eps)`.
    noise_exp: Vec<[f64; 5]>,
}

impl ImpactCandidates {
    fn new(model: &AsrModel, grids: &Grids, n: usize, noise: bool) -> Self {
        let c = candidates(model, grids, n);
        let gamma = model.risk.gamma;
        let k = model.market.k_perm;
        let dt = model.contract.dt;
        let mut out = Self {
            offsets: c.offsets.clone(),
            traded: Vec::new(),
            drift: Vec::new(),
            base: Vec::new(),
            noise_load: Vec::new(),
            noise_exp: Vec::new(),
        };
        for (i, &d) in c.offsets.iter().enumerate() {
            let traded = d as f64 * grids.q_step;
            let v = traded / dt;
            let scale = if noise { model.market.sigma * v * dt.powf(1.5) / 3f64.sqrt() } else { 0.0 };
            let mut base = c.costs[i] - 0.5 * k * traded * traded;
            if gamma > 0.0 && scale != 0.0 {
                base += law::mgf(-0.5 * gamma * scale).ln() / gamma;
            }
            let load = 0.5 * 3f64.sqrt() * scale;
            out.traded.push(traded);
            out.drift.push(k * traded);
            out.base.push(base);
            out.noise_load.push(load);
            out.noise_exp.push(std::array::from_fn(|e| (-gamma * load * EPSILONS[e]).exp()));
        }
        out
    }
}

/// One day of the impact recursion.
pub(crate) struct ImpactStep<'a> {
    model: &'a AsrModel,
    grids: &'a Grids,
    a_basis: &'a SplineBasis,
    rows: &'a RowTables,
    cand: ImpactCandidates,
    n: usize,
    closed_form_next: bool,
    /// Price shifts differ across candidates.
    per_candidate_columns: bool,
}

pub(crate) struct ImpactScratch {
    cols: Vec<f64>,
    exps: Vec<f64>,
}

impl<'a> ImpactStep<'a> {
    pub fn new(
        model: &'a AsrModel,
        grids: &'a Grids,
        a_basis: &'a SplineBasis,
        rows: &'a RowTables,
        n: usize,
        closed_form_terminal: bool,
        noise: bool,
    ) -> Self {
        let cand = ImpactCandidates::new(model, grids, n, noise);
        Self {
            model,
            grids,
            a_basis,
            rows,
            per_candidate_columns: model.market.k_perm != 0.0,
            cand,
            n,
            closed_form_next: closed_form_terminal && n + 1 == model.contract.days,
        }
    }

    pub fn scratch(&self) -> ImpactScratch {
        let len = self.column_sets() * 5 * self.grids.n_q();
        ImpactScratch { cols: vec![0.0; len], exps: vec![0.0; len] }
    }

    fn column_sets(&self) -> usize {
        if self.per_candidate_columns {
            self.cand.offsets.len()
        } else {
            1
        }
    }

    /// Next-day values for every candidate and innovation from `(s, a)`.
    /// Returns (queries, extrapolated queries).
    fn columns(&self, s: f64, a: f64, next: &BicubicDay<'_>, cols: &mut [f64]) -> (u64, u64) {
        let n_q = self.grids.n_q();
        let h = self.model.price_step();
        let m = self.n as f64;
        let mut extrapolated = 0;
        let sets = self.column_sets();
        for set in 0..sets {
            let drift = if self.per_candidate_columns { self.cand.drift[set] } else { 0.0 };
            for e in 0..5 {
                let s_next = s + h * EPSILONS[e] + drift;
                let a_next = (m * a + s_next) / (m + 1.0);
                let col = &mut cols[(set * 5 + e) * n_q..(set * 5 + e + 1) * n_q];
                if self.closed_form_next {
                    for (c, &q) in col.iter_mut().zip(&self.grids.q) {
                        *c = self.model.intrinsic(q, s_next, a_next);
                    }
                    continue;
                }
                let ws = next.s_weights(s_next);
                let wa = self.a_basis.weights(a_next);
                extrapolated += u64::from(ws.extrapolated || wa.extrapolated);
                next.column(&ws, &wa, col);
            }
        }
        ((sets * 5) as u64, extrapolated)
    }

    fn prepare(&self, cols: &[f64], exps: &mut [f64]) -> f64 {
        let gamma = self.model.risk.gamma;
        if gamma == 0.0 {
            return 0.0;
        }
        let top = cols.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let shift = gamma * top;
        for (x, &c) in exps.iter_mut().zip(cols) {
            *x = (gamma * c - shift).exp();
        }
        shift
    }

    /// Best candidate from inventory row `q`.
    fn best(&self, q: usize, cols: &[f64], exps: &[f64], shift: f64) -> Result<RowChoice> {
        let n_q = self.grids.n_q();
        let gamma = self.model.risk.gamma;
        let k = self.model.market.k_perm;
        let qv = self.grids.q[q];
        let cand = &self.cand;
        let set_of = |i: usize| if self.per_candidate_columns { i } else { 0 };
        let mut best = f64::INFINITY;
        let mut target = usize::MAX;
        if gamma == 0.0 {
            for (i, &d) in cand.offsets.iter().enumerate() {
                let Some(j) = shifted(q, d, n_q) else { continue };
                let set = set_of(i);
                let mut v = cand.base[i] - k * cand.traded[i] * qv;
                for e in 0..5 {
                    v += PROBS[e] * cols[(set * 5 + e) * n_q + j];
                }
                if v < best {
                    best = v;
                    target = j;
                }
            }
            return self.finish(q, best, target, false);
        }
        // Factored: compare exp(gamma * value) up to a common positive factor.
        let w = &self.rows.weight[q];
        for (i, &d) in cand.offsets.iter().enumerate() {
            let Some(j) = shifted(q, d, n_q) else { continue };
            let set = set_of(i);
            let mut sum = 0.0;
            for e in 0..5 {
                sum += w[e] * cand.noise_exp[i][e] * exps[(set * 5 + e) * n_q + j];
            }
            let key = sum * (gamma * (cand.base[i] - k * cand.traded[i] * qv)).exp();
            if key < best {
                best = key;
                target = j;
            }
        }
        if target != usize::MAX && best.is_finite() && best > 1e-280 {
            let value = (best.ln() + shift + self.rows.shift[q]) / gamma;
            return self.finish(q, value, target, false);
        }
        let g = &self.rows.gain[q];
        best = f64::INFINITY;
        target = usize::MAX;
        let mut y = [0.0; 5];
        for (i, &d) in cand.offsets.iter().enumerate() {
            let Some(j) = shifted(q, d, n_q) else { continue };
            let set = set_of(i);
            for e in 0..5 {
                y[e] = cols[(set * 5 + e) * n_q + j] - g[e] - cand.noise_load[i] * EPSILONS[e];
            }
            let v = cand.base[i] - k * cand.traded[i] * qv + certainty_cost(gamma, &PROBS, &y);
            if v < best {
                best = v;
                target = j;
            }
        }
        self.finish(q, best, target, true)
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

    /// Continuation from an arbitrary price and average at inventory row `q`.
    pub fn continuation(
        &self,
        s: f64,
        a: f64,
        q: usize,
        next: &BicubicDay<'_>,
        scratch: &mut ImpactScratch,
    ) -> Result<RowChoice> {
        self.columns(s, a, next, &mut scratch.cols);
        let shift = self.prepare(&scratch.cols, &mut scratch.exps);
        self.best(q, &scratch.cols, &scratch.exps, shift)
    }
}

#[inline]
fn shifted(q: usize, d: i64, n_q: usize) -> Option<usize> {
    let j = q as i64 + d;
    (j >= 0 && (j as usize) < n_q).then_some(j as usize)
}

fn price_grid(grids: &Grids) -> Result<&crate::grid::PriceGrid> {
    grids.s.as_ref().ok_or_else(|| {
        AsrError::Configuration("the impact solver needs a price grid (set n_s)".into())
    })
}

/// Stop-now surface on the whole price grid.
pub fn impact_terminal_surface(model: &AsrModel, grids: &Grids) -> Result<DaySurface> {
    let sg = price_grid(grids)?;
    let days = model.contract.days;
    let (lo, hi) = sg.day_range(days, days);
    let (n_q, n_a) = (grids.n_q(), grids.n_a());
    let mut out = DaySurface::new(days, lo, hi - lo + 1, n_q, n_a);
    for j in lo..=hi {
        let s = sg.values[j];
        for (qi, &q) in grids.q.iter().enumerate() {
            for (ai, &a) in grids.a.iter().enumerate() {
                let k = ((j - lo) * n_q + qi) * n_a + ai;
                out.theta[k] = model.intrinsic(q, s, a);
                out.target[k] = qi as u32;
                out.exercise[k] = true;
            }
        }
    }
    Ok(out)
}

/// Spline data for interpolating a stored impact day.
pub(crate) fn bicubic_data(grids: &Grids, day: &DaySurface, a_basis: &SplineBasis) -> Result<BicubicData> {
    let sg = price_grid(grids)?;
    let knots = sg.values[day.node_offset..day.node_offset + day.n_nodes].to_vec();
    BicubicData::new(day, knots, a_basis)
}

#[derive(Default)]
struct DayStats {
    queries: u64,
    extrapolated: u64,
    fallback: u64,
}

fn step_day(step: &ImpactStep<'_>, next: &BicubicDay<'_>) -> Result<(DaySurface, DayStats)> {
    let model = step.model;
    let grids = step.grids;
    let n = step.n;
    let sg = price_grid(grids)?;
    let (lo, hi) = sg.day_range(n, model.contract.days);
    let (n_q, n_a) = (grids.n_q(), grids.n_a());
    let mut out = DaySurface::new(n, lo, hi - lo + 1, n_q, n_a);
    let block = n_q * n_a;
    let exercisable = model.contract.exercise_flags()[n];
    let stats: Vec<DayStats> = out
        .theta
        .par_chunks_mut(block)
        .zip(out.target.par_chunks_mut(block))
        .zip(out.exercise.par_chunks_mut(block))
        .enumerate()
        .map_init(
            || step.scratch(),
            |scratch, (local, ((theta, target), exercise))| -> Result<DayStats> {
                let node = lo + local;
                let s = sg.values[node];
                let mut st = DayStats::default();
                for (ai, &a) in grids.a.iter().enumerate() {
                    let (qs, ex) = step.columns(s, a, next, &mut scratch.cols);
                    st.queries += qs;
                    st.extrapolated += ex;
                    let shift = step.prepare(&scratch.cols, &mut scratch.exps);
                    for (qi, &q) in grids.q.iter().enumerate() {
                        let choice = step
                            .best(qi, &scratch.cols, &scratch.exps, shift)
                            .map_err(|e| match e {
                                AsrError::Numerical(_) => {
                                    AsrError::Solver { day: n, node, source: Box::new(e) }
                                }
                                other => other,
                            })?;
                        st.fallback += u64::from(choice.fallback);
                        let k = qi * n_a + ai;
                        theta[k] = choice.value;
                        target[k] = choice.target as u32;
                        if exercisable {
                            let stop = model.intrinsic(q, s, a);
                            if stop <= choice.value {
                                theta[k] = stop;
                                exercise[k] = true;
                            }
                        }
                    }
                }
                Ok(st)
            },
        )
        .collect::<Result<_>>()?;
    let total = stats.into_iter().fold(DayStats::default(), |acc, s| DayStats {
        queries: acc.queries + s.queries,
        extrapolated: acc.extrapolated + s.extrapolated,
        fallback: acc.fallback + s.fallback,
    });
    Ok((out, total))
}

/// One day of the impact recursion given the next day's surface.
pub fn impact_backward_step(
    model: &AsrModel,
    grids: &Grids,
    n: usize,
    next: &DaySurface,
    closed_form_terminal: bool,
    intraday_noise: bool,
) -> Result<DaySurface> {
    if next.day != n + 1 {
        return Err(AsrError::Configuration(format!("day {n} needs the surface of day {}", n + 1)));
    }
    let a_basis = SplineBasis::new(grids.a.clone())?;
    let rows = RowTables::new(model, grids);
    let step = ImpactStep::new(model, grids, &a_basis, &rows, n, closed_form_terminal, intraday_noise);
    let data = bicubic_data(grids, next, &a_basis)?;
    Ok(step_day(&step, &BicubicDay { day: next, data: &data })?.0)
}

/// Solve the recursion with permanent impact on the price grid.
pub fn solve_with_impact(
    model: &AsrModel,
    spec: &GridSpec,
    options: &ImpactOptions,
) -> Result<PolicyCube> {
    let started = Instant::now();
    if spec.n_s.is_none() {
        return Err(AsrError::Configuration("the impact solver needs n_s in the grid section".into()));
    }
    let grids = build_grids(spec, model)?;
    let a_basis = SplineBasis::new(grids.a.clone())?;
    let rows = RowTables::new(model, &grids);
    let days = model.contract.days;
    let mut out: Vec<Option<DaySurface>> = vec![None; days + 1];
    let mut stats = SolveStats::default();
    let mut next = impact_terminal_surface(model, &grids)?;
    for n in (0..days).rev() {
        let step = ImpactStep::new(
            model,
            &grids,
            &a_basis,
            &rows,
            n,
            spec.closed_form_terminal,
            options.intraday_noise,
        );
        let cur = {
            let data = bicubic_data(&grids, &next, &a_basis)?;
            let (cur, st) = step_day(&step, &BicubicDay { day: &next, data: &data })?;
            stats.total_queries += st.queries;
            stats.extrapolated_queries += st.extrapolated;
            stats.fallback_nodes += st.fallback;
            cur
        };
        if options.retain == Retain::Full {
            out[n + 1] = Some(next);
        }
        next = cur;
        log::debug!("impact day {n} done after {:.2?}", started.elapsed());
    }
    out[0] = Some(next);
    stats.wall_time_secs = started.elapsed().as_secs_f64();
    Ok(PolicyCube {
        meta: CubeMeta {
            model: model.clone(),
            grid: spec.clone(),
            kind: CubeKind::Impact,
            intraday_noise: options.intraday_noise,
            format_version: FORMAT_VERSION,
        },
        grids,
        days: out,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::fixtures::reference_grid;
    use crate::model::fixtures::reference;
    use crate::model::{ContractSpec, ExerciseSchedule, VolumeCurve};
    use crate::solver::{solve, SolverOptions};

    fn small() -> (AsrModel, GridSpec) {
        let mut m = reference();
        m.contract = ContractSpec {
            notional: 9.0e7,
            days: 5,
            dt: 1.0,
            exercise: ExerciseSchedule::Window { first: 2, last: 4 },
            discount: 0.0,
        };
        m.market.volume = VolumeCurve::Constant(4.0e5);
        let spec = GridSpec { n_q: 41, n_a: 9, q_max: 2.5e6, n_s: Some(21), ..reference_grid() };
        (m, spec)
    }

    #[test]
    fn without_impact_or_noise_matches_tree_solver() {
        let (m, spec) = small();
        let tree = solve(&m, &GridSpec { n_s: None, ..spec.clone() }, &SolverOptions::default()).unwrap();
        let opts = ImpactOptions { intraday_noise: false, ..Default::default() };
        let grid = solve_with_impact(&m, &spec, &opts).unwrap();
        let center = grid.root_node();
        for n in 0..=5 {
            let (t, g) = (tree.day(n).unwrap(), grid.day(n).unwrap());
            for zeta in 0..=4 * n {
                let node = center - 2 * n + zeta;
                let (tv, gv) = (t.node(zeta).unwrap(), g.node(node).unwrap());
                for (x, y) in tv.theta.iter().zip(gv.theta) {
                    assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "day {n}: {x} vs {y}");
                }
                assert_eq!(tv.target, gv.target);
            }
        }
    }

    #[test]
    fn impact_raises_the_price() {
        let (mut m, spec) = small();
        let opts = ImpactOptions { intraday_noise: false, ..Default::default() };
        let base = solve_with_impact(&m, &spec, &opts).unwrap().root_value().unwrap();
        m.market.k_perm = 2e-8;
        let spec = GridSpec { n_s: Some(23), ..spec };
        let hit = solve_with_impact(&m, &spec, &opts).unwrap().root_value().unwrap();
        assert!(hit > base, "{hit} <= {base}");
    }

    #[test]
    fn noise_only_adds_risk() {
        let (m, spec) = small();
        let quiet = solve_with_impact(&m, &spec, &ImpactOptions { intraday_noise: false, ..Default::default() })
            .unwrap()
            .root_value()
            .unwrap();
        let noisy = solve_with_impact(&m, &spec, &ImpactOptions::default()).unwrap().root_value().unwrap();
        assert!(noisy != quiet);
        let mut neutral = m.clone();
        neutral.risk.gamma = 0.0;
        let a = solve_with_impact(&neutral, &spec, &ImpactOptions::default()).unwrap().root_value().unwrap();
        let b = solve_with_impact(&neutral, &spec, &ImpactOptions { intraday_noise: false, ..Default::default() })
            .unwrap()
            .root_value()
            .unwrap();
        assert!((a - b).abs() <= 1e-9 * a.abs(), "{a} vs {b}");
    }

    #[test]
    fn terminal_slice_is_closed_form() {
        let (mut m, spec) = small();
        m.market.k_perm = 2e-8;
        let spec = GridSpec { n_s: Some(23), ..spec };
        let grids = build_grids(&spec, &m).unwrap();
        let t = impact_terminal_surface(&m, &grids).unwrap();
        let sg = grids.s.as_ref().unwrap();
        let node = t.node(3).unwrap();
        let (q, a) = (grids.q[7], grids.a[2]);
        assert_eq!(node.theta(7, 2), m.intrinsic_value(q, sg.values[3], a).unwrap());
    }

    #[test]
    fn missing_price_grid_is_rejected() {
        let (m, spec) = small();
        let spec = GridSpec { n_s: None, ..spec };
        assert!(matches!(
            solve_with_impact(&m, &spec, &ImpactOptions::default()),
            Err(AsrError::Configuration(_))
        ));
    }
}
