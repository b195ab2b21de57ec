use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use asr::commands::{self, CliError, CliResult, SimulateInput};
use asr_core::pricing::SweepParam;
use asr_core::simulator::Generator;
use asr_core::RunConfig;

#[derive(Parser)]
#[command(name = "asr", version, about = "Price and execute accelerated share repurchases")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the full policy cube and save it.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Cube file (defaults to run.cube of the config).
        #[arg(long)]
        cube: Option<PathBuf>,
        /// JSON price report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Indifference price only.
    Price {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Largest affordable discount on the average price.
    Discount {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay a cube on a price path, or on seeded synthetic paths.
    Simulate {
        #[arg(long)]
        cube: Option<PathBuf>,
        /// Supplies run.cube, run.path, run.seed and Monte Carlo settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Price path CSV with header `day,price`.
        #[arg(long)]
        path: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long, value_enum)]
        generator: Option<GeneratorArg>,
        /// Output directory.
        #[arg(long, default_value = "simulation")]
        out: PathBuf,
    },
    /// Price across values of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        param: Option<ParamArg>,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
        /// CSV table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve policy lookups over HTTP.
    Serve {
        #[arg(long)]
        cube: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: String,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GeneratorArg {
    Pentanomial,
    Gaussian,
}

#[derive(Clone, Copy, ValueEnum)]
enum ParamArg {
    Eta,
    Phi,
    Psi,
    Sigma,
    Gamma,
    RhoLo,
    RhoHi,
    KPerm,
    Notional,
    Discount,
}

impl From<ParamArg> for SweepParam {
    fn from(p: ParamArg) -> Self {
        match p {
            ParamArg::Eta => SweepParam::Eta,
            ParamArg::Phi => SweepParam::Phi,
            ParamArg::Psi => SweepParam::Psi,
            ParamArg::Sigma => SweepParam::Sigma,
            ParamArg::Gamma => SweepParam::Gamma,
            ParamArg::RhoLo => SweepParam::RhoLo,
            ParamArg::RhoHi => SweepParam::RhoHi,
            ParamArg::KPerm => SweepParam::KPerm,
            ParamArg::Notional => SweepParam::Notional,
            ParamArg::Discount => SweepParam::Discount,
        }
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve { config, cube, out } => {
            let cfg = commands::load_config(&config)?;
            let cube = cube
                .or(cfg.run.cube.clone())
                .ok_or_else(|| CliError::Usage("no cube path: pass --cube or set run.cube".into()))?;
            let report = commands::solve(&cfg, &cube)?;
            print!("{}", report.to_text());
            println!("cube: {}", cube.display());
            if let Some(out) = out {
                commands::write_json(&out, &report)?;
            }
        }
        Command::Price { config, out } => {
            let report = commands::price_cmd(&commands::load_config(&config)?)?;
            print!("{}", report.to_text());
            if let Some(out) = out {
                commands::write_json(&out, &report)?;
            }
        }
        Command::Discount { config, out } => {
            let report = commands::discount(&commands::load_config(&config)?)?;
            print!("{}", report.to_text());
            if let Some(out) = out {
                commands::write_json(&out, &report)?;
            }
        }
        Command::Simulate { cube, config, path, seed, paths, generator, out } => {
            let cfg: Option<RunConfig> = config.as_deref().map(commands::load_config).transpose()?;
            let run = cfg.map(|c| c.run).unwrap_or_default();
            let cube = cube
                .or(run.cube.clone())
                .ok_or_else(|| CliError::Usage("no cube: pass --cube or a config with run.cube".into()))?;
            let input = match (path.or(run.path.clone()), seed) {
                (Some(p), None) => SimulateInput::PathCsv(p),
                (None, seed) | (Some(_), seed @ Some(_)) => SimulateInput::Seeded {
                    seed: seed.unwrap_or(run.seed),
                    n_paths: paths.unwrap_or(run.n_paths),
                    generator: match generator {
                        Some(GeneratorArg::Pentanomial) => Generator::Pentanomial,
                        Some(GeneratorArg::Gaussian) => Generator::Gaussian,
                        None => run.generator,
                    },
                },
            };
            let res = commands::simulate(&cube, &input, &out)?;
            println!("n_star: {}", res.replay.n_star);
            println!("shares_delivered: {:.0}", res.replay.shares_delivered);
            println!("total_cost: {:.2}", res.replay.total_cost);
            if let Some(mc) = &res.monte_carlo {
                println!("mc_paths: {}", mc.n_paths);
                println!("mc_mean_cost: {:.2}", mc.mean_cost);
                println!("mc_certainty_equivalent: {:.2} +- {:.2}", mc.certainty_equivalent, mc.ce_std_error);
                println!("pi: {:.2}", mc.pi);
            }
            println!("out: {}", out.display());
        }
        Command::Sweep { config, param, values, out } => {
            let cfg = commands::load_config(&config)?;
            let points = commands::sweep_cmd(&cfg, param.map(Into::into), values)?;
            for p in &points {
                println!("value: {} pi: {:.2} pi_over_f: {:.4}%", p.value, p.pi, 100.0 * p.pi_over_f);
            }
            if let Some(out) = out {
                commands::write_sweep_csv(&points, &out)?;
            }
        }
        Command::Serve { cube, bind } => {
            let engine = commands::load_engine(&cube)?;
            let rt = tokio::runtime::Runtime::new()
                .map_err(|e| CliError::Usage(format!("cannot start the runtime: {e}")))?;
            rt.block_on(asr::service::serve(engine, &bind))
                .map_err(|e| CliError::Usage(format!("cannot serve on {bind}: {e}")))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
