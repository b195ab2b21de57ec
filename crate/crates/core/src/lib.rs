//! Pricing and optimal execution of fixed-notional accelerated share
//! repurchase (ASR) contracts under CARA preferences.

pub mod cara;
pub mod config;
pub mod error;
pub mod grid;
pub mod impact;
pub mod io;
pub mod model;
pub mod policy;
pub mod pricing;
pub mod simulator;
pub mod solver;
pub mod spline;

pub use config::RunConfig;
pub use error::{AsrError, Result};
pub use grid::{build_grids, GridSpec, Grids};
pub use impact::{solve_with_impact, ImpactOptions};
pub use model::{AsrModel, ContractSpec, ExerciseSchedule, MarketParams, MarketState, RiskParams, VolumeCurve};
pub use policy::{PolicyAnswer, PolicyEngine, PolicyQuery, PreviewAnswer, PreviewRequest};
pub use pricing::{indifference_price, max_discount, price, solve_model, DiscountOptions, DiscountReport, PriceReport};
pub use simulator::{decompose_cost, monte_carlo, simulate_path, MonteCarloOptions, PricePath, SimulationResult};
pub use solver::{solve, PolicyCube, Retain, SolverOptions};
