// Query the solved policy at states between grid points and step a state
// forward by hand.

use std::sync::Arc;

use asr_core::{
    solve, AsrError, ExerciseSchedule, GridSpec, MarketState, PolicyAnswer, PolicyEngine, PolicyQuery,
    PreviewRequest, RunConfig, SolverOptions, VolumeCurve,
};

pub fn run_example() -> Result<Vec<PolicyAnswer>, AsrError> {
    let mut cfg = RunConfig::reference();
    cfg.contract.notional = 9.0e7;
    cfg.contract.days = 12;
    cfg.contract.exercise = ExerciseSchedule::Window { first: 5, last: 11 };
    cfg.market.volume = VolumeCurve::Constant(1.5e6);
    cfg.grid = GridSpec { n_q: 41, n_a: 9, q_max: 2.5e6, xi: 3.0, n_s: None, closed_form_terminal: false };

    let model = cfg.model()?;
    let engine = PolicyEngine::new(Arc::new(solve(&model, &cfg.grid, &SolverOptions::default())?))?;

    let mut answers = Vec::new();
    for (n, s, q, a) in [(3, 44.6, 6.0e5, 44.9), (6, 44.0, 1.3e6, 44.5), (6, 46.0, 1.3e6, 45.5)] {
        let ans = engine.answer(&PolicyQuery { n, s, q, a })?;
        println!(
            "n={n} S={s} q={q:e} A={a}: order {:.0}, exercise {}, theta {:.0}",
            ans.order, ans.exercise, ans.theta
        );
        answers.push(ans);
    }

    let start = MarketState::initial(&model);
    let first = engine.answer(&PolicyQuery { n: 0, s: start.s, q: start.q, a: start.a })?;
    let next = engine.preview(&PreviewRequest { state: start, order: first.order, eps: 1.0, eps_prime: 0.0 })?;
    println!("after day 1 up-move: {:?}", next.state);
    Ok(answers)
}

#[allow(dead_code)]
fn main() -> Result<(), AsrError> {
    run_example().map(|_| ())
}
