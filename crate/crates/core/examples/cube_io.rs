// Write a solved cube to disk, read it back, and export it as CSV.

use asr_core::io::{export_cube_csv, load_cube, save_cube, Precision};
use asr_core::{solve, AsrError, ExerciseSchedule, GridSpec, RunConfig, SolverOptions, VolumeCurve};

/// Returns the size of the cube file and the number of CSV lines.
pub fn run_example() -> Result<(u64, usize), AsrError> {
    let mut cfg = RunConfig::reference();
    cfg.contract.notional = 9.0e7;
    cfg.contract.days = 8;
    cfg.contract.exercise = ExerciseSchedule::Window { first: 3, last: 7 };
    cfg.market.volume = VolumeCurve::Constant(1.5e6);
    cfg.grid = GridSpec { n_q: 21, n_a: 5, q_max: 2.0e6, xi: 3.0, n_s: None, closed_form_terminal: false };

    let cube = solve(&cfg.model()?, &cfg.grid, &SolverOptions::default())?;
    let path = std::env::temp_dir().join(format!("asr-example-{}.cube", std::process::id()));
    save_cube(&cube, &path, Precision::F64)?;
    let size = std::fs::metadata(&path)?.len();
    let back = load_cube(&path)?;
    std::fs::remove_file(&path)?;
    assert_eq!(back.root_value()?, cube.root_value()?);

    let mut csv = Vec::new();
    export_cube_csv(&back, &mut csv)?;
    let text = String::from_utf8_lossy(&csv);
    let lines = text.lines().count();
    println!("cube: {size} bytes, {lines} CSV lines");
    for l in text.lines().take(4) {
        println!("{l}");
    }
    Ok((size, lines))
}

#[allow(dead_code)]
fn main() -> Result<(), AsrError> {
    run_example().map(|_| ())
}
