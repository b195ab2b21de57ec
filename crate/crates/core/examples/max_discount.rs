// Largest discount on the average price the bank can offer and still break
// even, on a short contract.

use asr_core::{max_discount, AsrError, DiscountOptions, DiscountReport, GridSpec, RunConfig};

pub fn run_example() -> Result<DiscountReport, AsrError> {
    let mut cfg = RunConfig::reference();
    cfg.contract.notional = 9.0e7;
    cfg.contract.days = 12;
    cfg.contract.exercise = asr_core::ExerciseSchedule::Window { first: 5, last: 11 };
    cfg.market.volume = asr_core::VolumeCurve::Constant(1.5e6);
    cfg.grid = GridSpec { n_q: 41, n_a: 9, q_max: 2.5e6, xi: 3.0, n_s: None, closed_form_terminal: false };

    let opts = DiscountOptions { tol_beta: 1e-4, ..DiscountOptions::default() };
    let report = max_discount(&cfg.model()?, &cfg.grid, &opts)?;
    println!("{}", report.to_text());
    Ok(report)
}

#[allow(dead_code)]
fn main() -> Result<(), AsrError> {
    run_example().map(|_| ())
}
