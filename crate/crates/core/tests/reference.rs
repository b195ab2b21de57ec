//! Slow checks on the reference contract beyond the headline figures.

use std::sync::Arc;

use asr_core::grid::fixtures::reference_grid;
use asr_core::model::fixtures::reference;
use asr_core::simulator::Generator;
use asr_core::{max_discount, monte_carlo, solve, DiscountOptions, MonteCarloOptions, PolicyEngine, SolverOptions};

#[test]
fn reference_discount_zeroes_the_price() {
    let m = reference();
    let spec = reference_grid();
    let report = max_discount(&m, &spec, &DiscountOptions::default()).unwrap();
    let beta = report.beta_star;
    assert!(beta > 0.0 && beta < 0.05, "beta* = {beta}");
    assert!(report.bracket.1 - report.bracket.0 <= 1e-4);
    for w in report.trace.windows(2) {
        if w[1].0 > w[0].0 {
            assert!(w[1].1 >= w[0].1, "price not increasing along {:?}", report.trace);
        }
    }

    let mut at = m.clone();
    at.contract.discount = beta;
    let pi = solve(&at, &spec, &SolverOptions::root_only()).unwrap().root_value().unwrap();
    let share = pi.abs() / m.contract.notional;
    eprintln!("beta* = {beta:.6}, Pi(beta*)/F = {:.5}%", pi / m.contract.notional * 100.0);
    assert!(share <= 2e-4, "|Pi(beta*)|/F = {share}");
}

#[test]
fn monte_carlo_agrees_with_the_price() {
    let m = reference();
    let cube = solve(&m, &reference_grid(), &SolverOptions::default()).unwrap();
    let engine = PolicyEngine::new(Arc::new(cube)).unwrap();
    let opts = MonteCarloOptions { n_paths: 100_000, seed: 2024, generator: Generator::Pentanomial };
    let mc = monte_carlo(&engine, &opts).unwrap();
    // The bank's certainty equivalent of F minus the total cost is minus the
    // indifference price.
    let gap = (mc.certainty_equivalent - -mc.pi).abs();
    let allowed = 3.0 * mc.ce_std_error + 1e-3 * m.contract.notional;
    eprintln!(
        "CE = {:.0}, -Pi = {:.0}, gap {gap:.0}, allowed {allowed:.0}, extrapolated paths {}",
        mc.certainty_equivalent, -mc.pi, mc.extrapolated_paths
    );
    assert!(gap <= allowed);
    assert!(mc.extrapolated_paths < opts.n_paths / 10);
}
