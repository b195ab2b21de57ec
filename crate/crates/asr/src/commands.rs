//! Subcommands of the `asr` binary, callable without a process.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use asr_core::io::{load_cube, read_path_csv, save_cube, write_path_csv, write_result_csv, ReplaySummary};
use asr_core::pricing::{sweep, SweepParam, SweepPoint};
use asr_core::simulator::{Generator, MonteCarloSummary};
use asr_core::{
    decompose_cost, indifference_price, max_discount, monte_carlo, price, simulate_path, solve_model,
    AsrError, DiscountOptions, DiscountReport, MonteCarloOptions, PolicyEngine, PriceReport, PricePath,
    Retain, RunConfig,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] AsrError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type CliResult<T> = Result<T, CliError>;

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::File { path: dir.into(), source })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::File { path: path.into(), source })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(AsrError::from)?;
    fs::write(path, text + "\n").map_err(|source| CliError::File { path: path.into(), source })
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = fs::read_to_string(path).map_err(|source| CliError::File { path: path.into(), source })?;
    Ok(RunConfig::from_json(&text)?)
}

/// Load a cube, naming the file in I/O errors.
pub fn open_cube(path: &Path) -> CliResult<asr_core::PolicyCube> {
    load_cube(path).map_err(|e| match e {
        AsrError::Io(source) => CliError::File { path: path.into(), source },
        other => other.into(),
    })
}

/// Solve with full retention and write the cube to `cube_path`.
pub fn solve(cfg: &RunConfig, cube_path: &Path) -> CliResult<PriceReport> {
    let model = cfg.model()?;
    let cube = solve_model(&model, &cfg.grid, Retain::Full, cfg.run.intraday_noise)?;
    if let Some(dir) = cube_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::File { path: dir.into(), source })?;
    }
    save_cube(&cube, cube_path, cfg.run.precision)?;
    Ok(indifference_price(&cube)?)
}

pub fn price_cmd(cfg: &RunConfig) -> CliResult<PriceReport> {
    Ok(price(&cfg.model()?, &cfg.grid, cfg.run.intraday_noise)?)
}

pub fn discount(cfg: &RunConfig) -> CliResult<DiscountReport> {
    let opts = DiscountOptions {
        tol_beta: cfg.run.tol_beta,
        intraday_noise: cfg.run.intraday_noise,
        ..DiscountOptions::default()
    };
    Ok(max_discount(&cfg.model()?, &cfg.grid, &opts)?)
}

/// Sweep from the config, with `param`/`values` overriding its sweep section.
pub fn sweep_cmd(cfg: &RunConfig, param: Option<SweepParam>, values: Option<Vec<f64>>) -> CliResult<Vec<SweepPoint>> {
    let section = cfg.sweep.as_ref();
    let param = param
        .or(section.map(|s| s.param))
        .ok_or_else(|| CliError::Usage("no sweep parameter: pass --param or add a sweep section".into()))?;
    let values = values
        .or(section.map(|s| s.values.clone()))
        .ok_or_else(|| CliError::Usage("no sweep values: pass --values or add a sweep section".into()))?;
    if values.is_empty() {
        return Err(CliError::Usage("sweep values are empty".into()));
    }
    Ok(sweep(&cfg.model()?, &cfg.grid, param, &values, cfg.run.intraday_noise)?)
}

pub fn write_sweep_csv(points: &[SweepPoint], path: &Path) -> CliResult<()> {
    use std::io::Write;
    let mut w = create(path)?;
    let io = |source| CliError::File { path: path.into(), source };
    writeln!(w, "value,pi,pi_over_f").map_err(io)?;
    for p in points {
        writeln!(w, "{},{},{}", p.value, p.pi, p.pi_over_f).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Where simulate gets its prices.
#[derive(Debug, Clone)]
pub enum SimulateInput {
    /// A `day,price` CSV.
    PathCsv(PathBuf),
    /// Synthetic paths from a seed; the first one is also written out.
    Seeded { seed: u64, n_paths: usize, generator: Generator },
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateOutput {
    pub replay: ReplaySummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloSummary>,
}

/// Replay a cube and write `trajectory.csv` and `summary.json` to `out_dir`;
/// seeded runs also write the generated `path.csv` and Monte Carlo results.
pub fn simulate(cube_path: &Path, input: &SimulateInput, out_dir: &Path) -> CliResult<SimulateOutput> {
    let engine = PolicyEngine::new(Arc::new(open_cube(cube_path)?))?;
    let model = engine.cube().model().clone();
    fs::create_dir_all(out_dir).map_err(|source| CliError::File { path: out_dir.into(), source })?;
    let (path, mc) = match input {
        SimulateInput::PathCsv(p) => {
            let f = File::open(p).map_err(|source| CliError::File { path: p.clone(), source })?;
            (PricePath::Prices(read_path_csv(f)?), None)
        }
        SimulateInput::Seeded { seed, n_paths, generator } => {
            let path = PricePath::synthetic(model.contract.days, *seed, 0, *generator);
            let mc = monte_carlo(&engine, &MonteCarloOptions { n_paths: *n_paths, seed: *seed, generator: *generator })?;
            (path, Some(mc))
        }
    };
    let result = simulate_path(&engine, &path)?;
    let decomposition = decompose_cost(&model, &result)?;
    let replay = ReplaySummary::new(&result, decomposition);

    let traj = out_dir.join("trajectory.csv");
    write_result_csv(&result.rows, create(&traj)?)?;
    if matches!(input, SimulateInput::Seeded { .. }) {
        let prices: Vec<f64> = result.rows.iter().skip(1).map(|r| r.s).collect();
        write_path_csv(&prices, create(&out_dir.join("path.csv"))?)?;
    }
    let out = SimulateOutput { replay, monte_carlo: mc };
    write_json(&out_dir.join("summary.json"), &out)?;
    Ok(out)
}

pub fn load_engine(cube_path: &Path) -> CliResult<Arc<PolicyEngine>> {
    Ok(Arc::new(PolicyEngine::new(Arc::new(open_cube(cube_path)?))?))
}
