//! Brute-force references for tiny instances, written from the model
//! definitions without going through the solver code.
#![allow(dead_code)]

use asr_core::{AsrModel, ContractSpec, ExerciseSchedule, GridSpec, MarketParams, RiskParams, VolumeCurve};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const EPS: [f64; 5] = [-2.0, -1.0, 0.0, 1.0, 2.0];
pub const P: [f64; 5] = [1.0 / 12.0, 1.0 / 6.0, 0.5, 1.0 / 6.0, 1.0 / 12.0];

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

/// A tiny problem: model, grid, and which rows to compare.
#[derive(Debug, Clone)]
pub struct Instance {
    pub label: String,
    pub model: AsrModel,
    pub spec: GridSpec,
    pub noise: bool,
}

/// Model formulas, restated.
pub struct Formulas<'a> {
    pub m: &'a AsrModel,
}

impl Formulas<'_> {
    pub fn l(&self, rho: f64) -> f64 {
        let mk = &self.m.market;
        if rho == 0.0 {
            0.0
        } else {
            mk.eta * rho.abs().powf(1.0 + mk.phi) + mk.psi * rho.abs()
        }
    }

    /// Euro cost of trading `shares` during day `n`.
    pub fn cost(&self, n: usize, shares: f64) -> f64 {
        let vdt = self.m.market.volume.next(n) * self.m.contract.dt;
        self.l(shares / vdt) * vdt
    }

    pub fn premium(&self, x: f64) -> f64 {
        let r = self.m.risk.rho_exec;
        let vbar = self.m.market.volume.mean();
        let g = self.m.risk.gamma;
        let s = self.m.market.sigma;
        self.l(r) / r * x.abs() + g * s * s / (6.0 * r * vbar) * x.abs().powi(3)
    }

    pub fn fe(&self) -> f64 {
        self.m.contract.notional / (1.0 - self.m.contract.discount)
    }

    /// Cash still to pay when settling now with `q` shares bought.
    pub fn settle(&self, q: f64, s: f64, a: f64) -> f64 {
        let r = self.fe() / a - q;
        r * s + self.premium(r) + 0.5 * self.m.market.k_perm * r * r - self.m.contract.notional
    }

    pub fn can_stop(&self, n: usize) -> bool {
        n == self.m.contract.days || self.m.contract.exercise_days().contains(&n)
    }

    /// Admissible order sizes in grid steps on day `n`.
    pub fn offsets(&self, n: usize, step: f64) -> Vec<i64> {
        let vdt = self.m.market.volume.next(n) * self.m.contract.dt;
        let (lo, hi) = (self.m.risk.rho_lo * vdt, self.m.risk.rho_hi * vdt);
        let (dlo, dhi) = ((lo / step - 1e-9).ceil() as i64, (hi / step + 1e-9).floor() as i64);
        (dlo..=dhi).collect()
    }

    pub fn h(&self) -> f64 {
        self.m.market.sigma * self.m.contract.dt.sqrt()
    }

    /// `(1/gamma) log sum p exp(gamma y)`, or the mean when `gamma = 0`.
    pub fn ce(&self, p: &[f64], y: &[f64]) -> f64 {
        let g = self.m.risk.gamma;
        if g == 0.0 {
            return p.iter().zip(y).map(|(p, y)| p * y).sum();
        }
        let top = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = p.iter().zip(y).map(|(p, y)| p * (g * (y - top)).exp()).sum();
        top + s.ln() / g
    }
}

/// Next-day scenarios: `(probability, eps, eps')`.
pub fn scenarios(joint: bool) -> Vec<(f64, f64, f64)> {
    if !joint {
        return EPS.iter().zip(P).map(|(&e, p)| (p, e, 0.0)).collect();
    }
    let mut out = Vec::with_capacity(25);
    for (&e, pe) in EPS.iter().zip(P) {
        for (&t, pt) in EPS.iter().zip(P) {
            out.push((pe * pt, e, 0.5 * 3f64.sqrt() * e + 0.5 * t));
        }
    }
    out
}

/// Optimal risk-adjusted remaining cash outlay from a state, by recursion
/// over the full history tree with the exact running average. Orders move
/// on the inventory grid `q`.
pub struct CashOracle<'a> {
    pub f: Formulas<'a>,
    pub q: &'a [f64],
    pub noise: bool,
}

impl CashOracle<'_> {
    fn step_cash(&self, n: usize, s: f64, traded: f64, eps: f64, eps_prime: f64) -> (f64, f64) {
        let m = self.f.m;
        let dt = m.contract.dt;
        let k = m.market.k_perm;
        let s_next = s + self.f.h() * eps + k * traded;
        let mut cash = traded * s_next + self.f.cost(n, traded) - 0.5 * k * traded * traded;
        if self.noise {
            cash -= m.market.sigma * (traded / dt) * dt.powf(1.5) / 3f64.sqrt() * eps_prime;
        }
        (s_next, cash)
    }

    pub fn value(&self, n: usize, s: f64, a: f64, qi: usize) -> f64 {
        let m = self.f.m;
        let q = self.q[qi];
        let stop = self.f.settle(q, s, a);
        if n == m.contract.days {
            return stop;
        }
        let step = self.q[1] - self.q[0];
        let sc = scenarios(self.noise);
        let mut best = f64::INFINITY;
        for d in self.f.offsets(n, step) {
            let j = qi as i64 + d;
            if j < 0 || j as usize >= self.q.len() {
                continue;
            }
            let traded = self.q[j as usize] - q;
            let mut p = Vec::with_capacity(sc.len());
            let mut y = Vec::with_capacity(sc.len());
            for &(pr, e, ep) in &sc {
                let (s_next, cash) = self.step_cash(n, s, traded, e, ep);
                let a_next = (n as f64 * a + s_next) / (n as f64 + 1.0);
                p.push(pr);
                y.push(cash + self.value(n + 1, s_next, a_next, j as usize));
            }
            best = best.min(self.f.ce(&p, &y));
        }
        if n > 0 && self.f.can_stop(n) {
            best = best.min(stop);
        }
        best
    }

    /// Root value in the units of the solver's day-0 surface at row `qi`.
    pub fn theta0(&self, qi: usize) -> f64 {
        let s0 = self.f.m.market.s0;
        self.value(0, s0, s0, qi) + self.q[qi] * s0
    }
}

/// Same optimum written with the decomposition of the realized objective
/// into risk, liquidity and post-settlement terms (base model only).
pub struct DecompositionOracle<'a> {
    pub f: Formulas<'a>,
    pub q: &'a [f64],
}

#[derive(Clone, Copy)]
struct Path {
    n: usize,
    s: f64,
    sum_s: f64,
    /// `sum_j q_j dS_j`.
    qds: f64,
    /// `sum_j j dS_j`.
    jds: f64,
    liq: f64,
}

impl DecompositionOracle<'_> {
    fn objective(&self, p: &Path, q: f64) -> f64 {
        let fe = self.f.fe();
        let ns = p.n as f64;
        let a = p.sum_s / ns;
        let shares = fe / a;
        let risk = p.qds - shares / ns * p.jds;
        let post = self.f.premium(shares - q);
        -risk + p.liq + post + fe - self.f.m.contract.notional
    }

    fn value(&self, p: Path, qi: usize) -> f64 {
        let m = self.f.m;
        let q = self.q[qi];
        if p.n == m.contract.days {
            return self.objective(&p, q);
        }
        let step = self.q[1] - self.q[0];
        let h = self.f.h();
        let mut best = f64::INFINITY;
        for d in self.f.offsets(p.n, step) {
            let j = qi as i64 + d;
            if j < 0 || j as usize >= self.q.len() {
                continue;
            }
            let traded = self.q[j as usize] - q;
            let y: Vec<f64> = EPS
                .iter()
                .map(|&e| {
                    let ds = h * e;
                    let next = Path {
                        n: p.n + 1,
                        s: p.s + ds,
                        sum_s: p.sum_s + p.s + ds,
                        qds: p.qds + q * ds,
                        jds: p.jds + p.n as f64 * ds,
                        liq: p.liq + self.f.cost(p.n, traded),
                    };
                    self.value(next, j as usize)
                })
                .collect();
            best = best.min(self.f.ce(&P, &y));
        }
        if p.n > 0 && self.f.can_stop(p.n) {
            best = best.min(self.objective(&p, q));
        }
        best
    }

    pub fn theta0(&self, qi: usize) -> f64 {
        let s0 = self.f.m.market.s0;
        let root = Path { n: 0, s: s0, sum_s: 0.0, qds: 0.0, jds: 0.0, liq: 0.0 };
        self.value(root, qi)
    }
}

/// Literal enumeration of every strategy of a two-day contract: a day-0
/// order, then per day-1 scenario either settlement or an order.
pub fn enumerate_two_day(f: &Formulas, q: &[f64], qi: usize) -> f64 {
    let m = f.m;
    assert_eq!(m.contract.days, 2);
    assert_eq!(m.market.k_perm, 0.0);
    let step = q[1] - q[0];
    let s0 = m.market.s0;
    let h = f.h();
    let day1: Vec<Option<i64>> = {
        let mut v: Vec<Option<i64>> = f.offsets(1, step).into_iter().map(Some).collect();
        if f.can_stop(1) {
            v.push(None);
        }
        v
    };
    let mut best = f64::INFINITY;
    for d0 in f.offsets(0, step) {
        let j0 = qi as i64 + d0;
        if j0 < 0 || j0 as usize >= q.len() {
            continue;
        }
        // Per-branch choices, as a base-|day1| counter over the five branches.
        let total = day1.len().pow(5);
        'strategy: for code in 0..total {
            let mut c = code;
            let mut probs = Vec::new();
            let mut ys = Vec::new();
            for (e1, p1) in EPS.iter().zip(P) {
                let choice = day1[c % day1.len()];
                c /= day1.len();
                let t0 = q[j0 as usize] - q[qi];
                let s1 = s0 + h * e1;
                let x1 = t0 * s1 + f.cost(0, t0);
                let a1 = s1;
                match choice {
                    None => {
                        probs.push(p1);
                        ys.push(x1 + f.settle(q[j0 as usize], s1, a1));
                    }
                    Some(d1) => {
                        let j1 = j0 + d1;
                        if j1 < 0 || j1 as usize >= q.len() {
                            continue 'strategy;
                        }
                        let t1 = q[j1 as usize] - q[j0 as usize];
                        for (e2, p2) in EPS.iter().zip(P) {
                            let s2 = s1 + h * e2;
                            let a2 = 0.5 * (s1 + s2);
                            let x2 = x1 + t1 * s2 + f.cost(1, t1);
                            probs.push(p1 * p2);
                            ys.push(x2 + f.settle(q[j1 as usize], s2, a2));
                        }
                    }
                }
            }
            best = best.min(f.ce(&probs, &ys));
        }
    }
    best + q[qi] * s0
}

fn exercise_subset(rng: &mut ChaCha8Rng, days: usize) -> ExerciseSchedule {
    loop {
        let picked: Vec<usize> = (1..days).filter(|_| rng.gen_bool(0.6)).collect();
        if !picked.is_empty() {
            return ExerciseSchedule::Days(picked);
        }
    }
}

fn random_model(
    rng: &mut ChaCha8Rng,
    days: usize,
    notional_shares: f64,
    q_step: f64,
    gamma_on: bool,
    steps_per_day: f64,
) -> AsrModel {
    let s0 = 45.0;
    let sigma = rng.gen_range(0.4..1.2);
    let q_max_scale = q_step * 10.0;
    let gamma = if gamma_on { rng.gen_range(0.2..2.0) / (sigma * q_max_scale) } else { 0.0 };
    // Participation of one period in grid steps.
    let volume = q_step * steps_per_day / 0.25;
    let rho_lo = if rng.gen_bool(0.5) { -0.25 } else { 0.0 };
    AsrModel::new(
        ContractSpec {
            notional: notional_shares * s0,
            days,
            dt: 1.0,
            exercise: exercise_subset(rng, days),
            discount: if rng.gen_bool(0.3) { 0.02 } else { 0.0 },
        },
        MarketParams {
            s0,
            sigma,
            volume: VolumeCurve::Constant(volume),
            eta: rng.gen_range(0.02..0.3),
            phi: rng.gen_range(0.4..1.0),
            psi: if rng.gen_bool(0.3) { 0.001 } else { 0.0 },
            k_perm: 0.0,
        },
        RiskParams { gamma, rho_lo, rho_hi: 0.25, rho_exec: rng.gen_range(0.1..0.3) },
    )
    .unwrap()
}

/// Base-model instances on which the solver has no interpolation error:
/// zero notional (values do not depend on the average), or two days with
/// closed-form settlement and average knots on the reachable prices.
pub fn base_instances(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let gamma_on = i % 2 == 1;
            let n_q = rng.gen_range(3..=11);
            let q_max = 1.0e4;
            let q_step = q_max / (n_q - 1) as f64;
            let steps = rng.gen_range(1..=3) as f64;
            if i % 4 < 2 {
                let days = rng.gen_range(2..=3);
                let model = random_model(&mut rng, days, 0.0, q_step, gamma_on, steps);
                let spec = GridSpec { n_q, n_a: rng.gen_range(4..=5), q_max, xi: 3.0, n_s: None, closed_form_terminal: false };
                Instance { label: format!("zero notional #{i} (N={days}, n_q={n_q})"), model, spec, noise: false }
            } else {
                let shares = rng.gen_range(0.3..1.0) * q_max;
                let mut model = random_model(&mut rng, 2, shares, q_step, gamma_on, steps);
                model.contract.exercise = ExerciseSchedule::Days(vec![1]);
                let spec = GridSpec {
                    n_q,
                    n_a: 5,
                    q_max,
                    xi: 4.0 / 2f64.sqrt(),
                    n_s: None,
                    closed_form_terminal: true,
                };
                Instance { label: format!("two-day #{i} (n_q={n_q})"), model, spec, noise: false }
            }
        })
        .collect()
}

/// Permanent-impact instances without interpolation error: zero notional,
/// or two days where one inventory step moves the price by one tree step,
/// orders are limited to one step, and the knots cover every reachable
/// `(S, A)`.
pub fn impact_instances(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let gamma_on = i % 2 == 1;
            let noise = i % 3 != 0;
            let q_max = 1.0e4;
            if i % 4 < 2 {
                let n_q = rng.gen_range(3..=9);
                let q_step = q_max / (n_q - 1) as f64;
                let days = rng.gen_range(2..=3);
                let steps = rng.gen_range(1..=2) as f64;
                let mut model = random_model(&mut rng, days, 0.0, q_step, gamma_on, steps);
                model.market.k_perm = rng.gen_range(0.5..2.0) * model.price_step() / q_step;
                let drift = (model.market.k_perm * q_max / model.price_step() - 1e-9).ceil() as usize;
                let n_s = 4 * days + 1 + drift + rng.gen_range(0..4);
                let spec = GridSpec { n_q, n_a: 4, q_max, xi: 3.0, n_s: Some(n_s), closed_form_terminal: false };
                Instance { label: format!("impact zero notional #{i} (N={days}, n_q={n_q})"), model, spec, noise }
            } else {
                let n_q = rng.gen_range(3..=7);
                let q_step = q_max / (n_q - 1) as f64;
                let shares = rng.gen_range(0.3..1.0) * q_max;
                let mut model = random_model(&mut rng, 2, shares, q_step, gamma_on, 1.0);
                model.contract.exercise = ExerciseSchedule::Days(vec![1]);
                model.market.k_perm = model.price_step() / q_step;
                let drift = n_q - 1;
                let n_s = 4 * 2 + 1 + drift + 2 + rng.gen_range(0..3);
                let spec = GridSpec {
                    n_q,
                    n_a: 7,
                    q_max,
                    xi: 6.0 / 2f64.sqrt(),
                    n_s: Some(n_s),
                    closed_form_terminal: true,
                };
                Instance { label: format!("impact two-day #{i} (n_q={n_q})"), model, spec, noise }
            }
        })
        .collect()
}
