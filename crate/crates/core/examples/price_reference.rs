// Indifference price of the reference contract: 63 days, 900M notional,
// exercisable from day 22.

use asr_core::grid::fixtures::reference_grid;
use asr_core::{price, AsrError, PriceReport, RunConfig};

pub fn run_example() -> Result<PriceReport, AsrError> {
    let cfg = RunConfig::reference();
    let model = cfg.model()?;
    let report = price(&model, &reference_grid(), cfg.run.intraday_noise)?;
    println!("{}", report.to_text());
    Ok(report)
}

#[allow(dead_code)]
fn main() -> Result<(), AsrError> {
    run_example().map(|_| ())
}
