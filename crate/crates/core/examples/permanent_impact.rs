// Permanent impact: the price grid solver with and without a linear impact
// coefficient.

use asr_core::impact::{solve_with_impact, ImpactOptions};
use asr_core::{AsrError, ExerciseSchedule, GridSpec, Retain, RunConfig, VolumeCurve};

/// Returns `(Pi without impact, Pi with impact)` as fractions of the notional.
pub fn run_example() -> Result<(f64, f64), AsrError> {
    let mut cfg = RunConfig::reference();
    cfg.contract.notional = 9.0e7;
    cfg.contract.days = 10;
    cfg.contract.exercise = ExerciseSchedule::Window { first: 4, last: 9 };
    cfg.market.volume = VolumeCurve::Constant(1.5e6);
    cfg.grid = GridSpec { n_q: 31, n_a: 7, q_max: 2.5e6, xi: 3.0, n_s: Some(81), closed_form_terminal: false };

    let opts = ImpactOptions { retain: Retain::RootOnly, intraday_noise: true };
    let mut run = |k: f64| -> Result<f64, AsrError> {
        cfg.market.k_perm = k;
        let cube = solve_with_impact(&cfg.model()?, &cfg.grid, &opts)?;
        Ok(cube.root_value()? / cfg.contract.notional)
    };
    let base = run(0.0)?;
    let impact = run(2.0e-7)?;
    println!("k = 0:      Pi/F = {:.4}%", base * 100.0);
    println!("k = 2e-7:   Pi/F = {:.4}%", impact * 100.0);
    Ok((base, impact))
}

#[allow(dead_code)]
fn main() -> Result<(), AsrError> {
    run_example().map(|_| ())
}
