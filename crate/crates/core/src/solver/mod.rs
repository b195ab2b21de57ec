//! Backward induction on the pentanomial tree for the risk-adjusted cost
//! `theta_n(q, S, A)`.
//!
//! Day `N` is the stop-now value. Each earlier day picks the target inventory
//! minimising the certainty-equivalent cost of trading plus the next-day
//! value, interpolating the next day in the average price with natural cubic
//! splines; on exercise days the result is capped by the stop-now value.

mod kernel;
mod surface;

use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{AsrError, Result};
use crate::grid::{build_grids, GridSpec, Grids};
use crate::model::AsrModel;
use crate::spline::SplineBasis;

pub(crate) use kernel::{RowTables, Scratch, StepContext};
pub(crate) use kernel::Candidates;
pub use kernel::RowChoice;
pub use surface::{
    CubeKind, CubeMeta, DaySurface, PolicyCube, SolveStats, ValueSurface, FORMAT_VERSION,
};

/// Which days a solve keeps in memory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Retain {
    /// Every day: needed for policy lookups and simulation.
    #[default]
    Full,
    /// Only day 0: enough for pricing and discount searches.
    RootOnly,
}

#[derive(Debug, Clone, Default)]
pub struct SolverOptions {
    pub retain: Retain,
    /// Skip the factorised exponentials and evaluate every candidate with a
    /// shifted log-sum-exp. Slower; used to cross-check the fast path.
    pub direct_kernel: bool,
}

impl SolverOptions {
    pub fn root_only() -> Self {
        Self { retain: Retain::RootOnly, ..Self::default() }
    }
}

pub(crate) fn kernel_candidates(model: &AsrModel, grids: &Grids, n: usize) -> Candidates {
    Candidates::for_day(model, grids, n)
}

/// Terminal surface: settle everywhere.
pub fn terminal_surface(model: &AsrModel, grids: &Grids) -> DaySurface {
    let days = model.contract.days;
    let n_nodes = 4 * days + 1;
    let (n_q, n_a) = (grids.n_q(), grids.n_a());
    let mut out = DaySurface::new(days, 0, n_nodes, n_q, n_a);
    let h = model.price_step();
    for zeta in 0..n_nodes {
        let s = model.market.s0 + h * (zeta as f64 - 2.0 * days as f64);
        for (qi, &q) in grids.q.iter().enumerate() {
            for (ai, &a) in grids.a.iter().enumerate() {
                let k = (zeta * n_q + qi) * n_a + ai;
                out.theta[k] = model.intrinsic(q, s, a);
                out.target[k] = qi as u32;
                out.exercise[k] = true;
            }
        }
    }
    out
}

/// Second derivatives in the average price of every `(node, q)` row.
pub fn second_derivatives(basis: &SplineBasis, day: &DaySurface) -> Vec<f64> {
    let n_a = day.n_a;
    let mut m = vec![0.0; day.theta.len()];
    m.par_chunks_mut(n_a)
        .zip(day.theta.par_chunks(n_a))
        .for_each(|(m, y)| basis.second_derivatives(y, m));
    m
}

#[derive(Default)]
struct Counters {
    extrapolated: AtomicU64,
    queries: AtomicU64,
    fallback: AtomicU64,
}

fn step_day(
    ctx: &StepContext<'_>,
    next: &DaySurface,
    next_m: &[f64],
    counters: &Counters,
) -> Result<DaySurface> {
    let model = ctx.model;
    let n = ctx.n;
    let (n_q, n_a) = (ctx.grids.n_q(), ctx.grids.n_a());
    let mut out = DaySurface::new(n, 0, 4 * n + 1, n_q, n_a);
    let block = n_q * n_a;
    let exercisable = model.contract.exercise_flags()[n];
    let h = model.price_step();
    out.theta
        .par_chunks_mut(block)
        .zip(out.target.par_chunks_mut(block))
        .zip(out.exercise.par_chunks_mut(block))
        .enumerate()
        .try_for_each_init(
            || Scratch::new(n_q),
            |scratch, (zeta, ((theta, target), exercise))| -> Result<()> {
                let s = model.market.s0 + h * (zeta as f64 - 2.0 * n as f64);
                let mut fallbacks = 0u64;
                let mut extrapolated = 0u64;
                for (ai, &a) in ctx.grids.a.iter().enumerate() {
                    extrapolated += u64::from(ctx.columns(
                        zeta,
                        a,
                        next,
                        |c| &next_m[c * block..(c + 1) * block],
                        &mut scratch.cols,
                    ));
                    let shift = ctx.prepare(&scratch.cols, &mut scratch.exps);
                    for (qi, &q) in ctx.grids.q.iter().enumerate() {
                        let choice = ctx
                            .best(qi, &scratch.cols, &scratch.exps, shift)
                            .map_err(|e| wrap(e, n, zeta))?;
                        fallbacks += u64::from(choice.fallback);
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
                counters.extrapolated.fetch_add(extrapolated, Ordering::Relaxed);
                counters.queries.fetch_add(5 * n_a as u64, Ordering::Relaxed);
                counters.fallback.fetch_add(fallbacks, Ordering::Relaxed);
                Ok(())
            },
        )?;
    Ok(out)
}

fn wrap(err: AsrError, day: usize, node: usize) -> AsrError {
    match err {
        AsrError::Numerical(_) => AsrError::Solver { day, node, source: Box::new(err) },
        other => other,
    }
}

/// One day of the recursion given the (complete) next-day surface.
pub fn backward_step(
    model: &AsrModel,
    grids: &Grids,
    n: usize,
    next: &DaySurface,
    closed_form_terminal: bool,
) -> Result<DaySurface> {
    if next.day != n + 1 || next.n_nodes != 4 * (n + 1) + 1 {
        return Err(AsrError::Configuration(format!(
            "day {n} needs the full tree surface of day {}",
            n + 1
        )));
    }
    let basis = SplineBasis::new(grids.a.clone())?;
    let rows = RowTables::new(model, grids);
    let ctx = StepContext::new(model, grids, &basis, &rows, n, closed_form_terminal, false);
    let m = second_derivatives(&basis, next);
    step_day(&ctx, next, &m, &Counters::default())
}

/// Solve the full recursion.
pub fn solve(model: &AsrModel, spec: &GridSpec, options: &SolverOptions) -> Result<PolicyCube> {
    if model.market.k_perm != 0.0 {
        return Err(AsrError::Configuration(
            "permanent impact is set; use the impact solver".into(),
        ));
    }
    let started = Instant::now();
    let grids = build_grids(spec, model)?;
    let basis = SplineBasis::new(grids.a.clone())?;
    let rows = RowTables::new(model, &grids);
    let days = model.contract.days;
    let counters = Counters::default();
    let mut out: Vec<Option<DaySurface>> = vec![None; days + 1];
    let mut next = terminal_surface(model, &grids);
    for n in (0..days).rev() {
        let ctx = StepContext::new(
            model,
            &grids,
            &basis,
            &rows,
            n,
            spec.closed_form_terminal,
            options.direct_kernel,
        );
        let m = second_derivatives(&basis, &next);
        let cur = step_day(&ctx, &next, &m, &counters)?;
        if options.retain == Retain::Full {
            out[n + 1] = Some(next);
        }
        next = cur;
        log::debug!("day {n} done after {:.2?}", started.elapsed());
    }
    out[0] = Some(next);
    let stats = SolveStats {
        extrapolated_queries: counters.extrapolated.into_inner(),
        total_queries: counters.queries.into_inner(),
        fallback_nodes: counters.fallback.into_inner(),
        wall_time_secs: started.elapsed().as_secs_f64(),
    };
    Ok(PolicyCube {
        meta: CubeMeta {
            model: model.clone(),
            grid: spec.clone(),
            kind: CubeKind::Tree,
            intraday_noise: false,
            format_version: FORMAT_VERSION,
        },
        grids,
        days: out,
        stats,
    })
}

/// Continuation value from tree node `(n, zeta)` at inventory row `q` and an
/// arbitrary average price `a`, recomputed from the stored day `n + 1`.
pub fn continuation_value(
    cube: &PolicyCube,
    n: usize,
    zeta: usize,
    q: usize,
    a: f64,
) -> Result<RowChoice> {
    if cube.meta.kind != CubeKind::Tree {
        return Err(AsrError::Configuration("continuation_value expects a tree cube".into()));
    }
    let model = cube.model();
    if n >= model.contract.days || zeta > 4 * n || q >= cube.grids.n_q() {
        return Err(AsrError::OutOfGrid(format!("no continuation at day {n}, node {zeta}, row {q}")));
    }
    let next = cube.day(n + 1)?;
    let basis = SplineBasis::new(cube.grids.a.clone())?;
    let rows = RowTables::new(model, &cube.grids);
    let ctx = StepContext::new(
        model,
        &cube.grids,
        &basis,
        &rows,
        n,
        cube.meta.grid.closed_form_terminal,
        false,
    );
    let (n_q, n_a) = (cube.grids.n_q(), cube.grids.n_a());
    let block = n_q * n_a;
    // Only the five child blocks are needed.
    let mut m = vec![0.0; 5 * block];
    let children = &next.theta[zeta * block..(zeta + 5) * block];
    for (mr, yr) in m.chunks_mut(n_a).zip(children.chunks(n_a)) {
        basis.second_derivatives(yr, mr);
    }
    let mut scratch = Scratch::new(n_q);
    ctx.columns(zeta, a, next, |c| &m[(c - zeta) * block..(c - zeta + 1) * block], &mut scratch.cols);
    let shift = ctx.prepare(&scratch.cols, &mut scratch.exps);
    ctx.best(q, &scratch.cols, &scratch.exps, shift)
}
