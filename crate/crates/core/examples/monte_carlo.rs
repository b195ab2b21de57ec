// Seeded Monte Carlo of the optimal strategy: cost distribution, exercise
// days, and the certainty equivalent next to the indifference price.

use std::sync::Arc;

use asr_core::simulator::{Generator, MonteCarloSummary};
use asr_core::{
    monte_carlo, solve, AsrError, ExerciseSchedule, GridSpec, MonteCarloOptions, PolicyEngine, RunConfig,
    SolverOptions, VolumeCurve,
};

pub fn run_example() -> Result<MonteCarloSummary, AsrError> {
    let mut cfg = RunConfig::reference();
    cfg.contract.notional = 9.0e7;
    cfg.contract.days = 12;
    cfg.contract.exercise = ExerciseSchedule::Window { first: 5, last: 11 };
    cfg.market.volume = VolumeCurve::Constant(1.5e6);
    cfg.grid = GridSpec { n_q: 41, n_a: 9, q_max: 2.5e6, xi: 3.0, n_s: None, closed_form_terminal: false };

    let cube = solve(&cfg.model()?, &cfg.grid, &SolverOptions::default())?;
    let engine = PolicyEngine::new(Arc::new(cube))?;
    let opts = MonteCarloOptions { n_paths: 2000, seed: 7, generator: Generator::Pentanomial };
    let mc = monte_carlo(&engine, &opts)?;
    println!("mean cost {:.0} (std {:.0})", mc.mean_cost, mc.std_cost);
    println!("CE of PnL {:.0} +/- {:.0}, -Pi {:.0}", mc.certainty_equivalent, mc.ce_std_error, -mc.pi);
    for (day, count) in &mc.exercise_histogram {
        println!("exercised on day {day}: {count}");
    }
    Ok(mc)
}

#[allow(dead_code)]
fn main() -> Result<(), AsrError> {
    run_example().map(|_| ())
}
