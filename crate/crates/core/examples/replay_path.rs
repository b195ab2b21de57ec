// Replay the optimal strategy on a falling price path and split the realized
// cost into its risk, spread, liquidity and post-settlement parts.

use std::sync::Arc;

use asr_core::simulator::CostDecomposition;
use asr_core::{
    decompose_cost, simulate_path, solve, AsrError, ExerciseSchedule, GridSpec, PolicyEngine, PricePath,
    RunConfig, SimulationResult, SolverOptions, VolumeCurve,
};

pub fn run_example() -> Result<(SimulationResult, CostDecomposition), AsrError> {
    let mut cfg = RunConfig::reference();
    cfg.contract.notional = 9.0e7;
    cfg.contract.days = 12;
    cfg.contract.exercise = ExerciseSchedule::Window { first: 5, last: 11 };
    cfg.market.volume = VolumeCurve::Constant(1.5e6);
    cfg.grid = GridSpec { n_q: 41, n_a: 9, q_max: 2.5e6, xi: 3.0, n_s: None, closed_form_terminal: false };

    let model = cfg.model()?;
    let cube = solve(&model, &cfg.grid, &SolverOptions::default())?;
    let engine = PolicyEngine::new(Arc::new(cube))?;

    let path = PricePath::linear(45.0, -0.3, model.contract.days);
    let result = simulate_path(&engine, &path)?;
    println!("day      S        A          q      order");
    for r in &result.rows {
        println!("{:>3} {:>8.3} {:>8.3} {:>10.0} {:>10.0}", r.day, r.s, r.a, r.q, r.order);
    }
    let parts = decompose_cost(&model, &result)?;
    println!("settled on day {}, total cost {:.0}", result.n_star, result.total_cost);
    println!(
        "risk {:.0}  spread {:.0}  liquidity {:.0}  post {:.0}",
        parts.risk, parts.spread, parts.liquidity, parts.post_exercise
    );
    Ok((result, parts))
}

#[allow(dead_code)]
fn main() -> Result<(), AsrError> {
    run_example().map(|_| ())
}
