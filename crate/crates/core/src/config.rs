//! Run configuration: one JSON document with the model, the grids and the
//! artifact paths.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{AsrError, Result};
use crate::grid::GridSpec;
use crate::io::Precision;
use crate::model::{AsrModel, ContractSpec, MarketParams, RiskParams};
use crate::pricing::SweepParam;
use crate::simulator::Generator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub contract: ContractSpec,
    pub market: MarketParams,
    pub risk: RiskParams,
    pub grid: GridSpec,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

/// Artifact paths and run settings. Paths are relative to the working
/// directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Policy cube written by `solve`, read by `simulate` and `serve`.
    pub cube: Option<PathBuf>,
    /// Output file or directory.
    pub out: Option<PathBuf>,
    /// Price path CSV (`day,price`) for `simulate`.
    pub path: Option<PathBuf>,
    pub seed: u64,
    /// Monte Carlo paths for `simulate` without a price path.
    pub n_paths: usize,
    pub generator: Generator,
    /// Intraday execution noise in the permanent-impact model.
    pub intraday_noise: bool,
    pub precision: Precision,
    pub tol_beta: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            cube: None,
            out: None,
            path: None,
            seed: 0,
            n_paths: 1000,
            generator: Generator::Pentanomial,
            intraday_noise: true,
            precision: Precision::F64,
            tol_beta: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| AsrError::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn model(&self) -> Result<AsrModel> {
        AsrModel::new(self.contract.clone(), self.market.clone(), self.risk.clone())
    }

    pub fn validate(&self) -> Result<()> {
        let model = self.model()?;
        self.grid.validate(&model.contract, &model.market)?;
        if self.run.n_paths == 0 {
            return Err(AsrError::InvalidParameter("run.n_paths must be at least 1".into()));
        }
        if self.run.tol_beta.is_nan() || self.run.tol_beta <= 0.0 {
            return Err(AsrError::InvalidParameter("run.tol_beta must be positive".into()));
        }
        if let Some(s) = &self.sweep {
            if s.values.is_empty() {
                return Err(AsrError::InvalidParameter("sweep.values is empty".into()));
            }
            for &v in &s.values {
                s.param.apply(&model, v)?;
            }
        }
        Ok(())
    }

    /// The reference configuration of the examples.
    pub fn reference() -> Self {
        let m = crate::model::fixtures::reference();
        RunConfig {
            contract: m.contract,
            market: m.market,
            risk: m.risk,
            grid: crate::grid::fixtures::reference_grid(),
            run: RunSection::default(),
            sweep: None,
        }
    }
}
