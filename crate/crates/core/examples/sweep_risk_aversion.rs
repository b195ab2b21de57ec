// Price as a function of risk aversion on a short contract.

use asr_core::pricing::{sweep, SweepParam, SweepPoint};
use asr_core::{AsrError, ExerciseSchedule, GridSpec, RunConfig, VolumeCurve};

pub fn run_example() -> Result<Vec<SweepPoint>, AsrError> {
    let mut cfg = RunConfig::reference();
    cfg.contract.notional = 9.0e7;
    cfg.contract.days = 12;
    cfg.contract.exercise = ExerciseSchedule::Window { first: 5, last: 11 };
    cfg.market.volume = VolumeCurve::Constant(1.5e6);
    cfg.grid = GridSpec { n_q: 41, n_a: 9, q_max: 2.5e6, xi: 3.0, n_s: None, closed_form_terminal: false };

    let gammas = [0.0, 2.5e-8, 2.5e-7, 2.5e-6];
    let points = sweep(&cfg.model()?, &cfg.grid, SweepParam::Gamma, &gammas, false)?;
    println!("gamma        Pi/F");
    for p in &points {
        println!("{:<12e} {:.4}%", p.value, p.pi_over_f * 100.0);
    }
    Ok(points)
}

#[allow(dead_code)]
fn main() -> Result<(), AsrError> {
    run_example().map(|_| ())
}
