use serde::{Deserialize, Serialize};

use crate::error::{AsrError, Result};
use crate::grid::{GridSpec, Grids};
use crate::model::AsrModel;

/// Version tag carried by persisted cubes.
pub const FORMAT_VERSION: u32 = 1;

/// Which recursion produced a cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CubeKind {
    /// Price nodes on the pentanomial tree.
    Tree,
    /// Price nodes on a uniform grid, with linear permanent impact.
    Impact,
}

/// Everything needed to regenerate a cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CubeMeta {
    pub model: AsrModel,
    pub grid: GridSpec,
    pub kind: CubeKind,
    /// Intraday execution noise of the closing-price convention (impact cubes).
    pub intraday_noise: bool,
    pub format_version: u32,
}

/// All price nodes of one day. Storage is node-major, then inventory, then
/// average price.
#[derive(Debug, Clone, PartialEq)]
pub struct DaySurface {
    pub day: usize,
    /// Tree level (or price-grid index) of the first stored node.
    pub node_offset: usize,
    pub n_nodes: usize,
    pub n_q: usize,
    pub n_a: usize,
    pub theta: Vec<f64>,
    /// Optimal target inventory as a q-grid index.
    pub target: Vec<u32>,
    pub exercise: Vec<bool>,
}

/// Borrowed view of the matrices at one price node.
#[derive(Debug, Clone, Copy)]
pub struct ValueSurface<'a> {
    pub n_q: usize,
    pub n_a: usize,
    pub theta: &'a [f64],
    pub target: &'a [u32],
    pub exercise: &'a [bool],
}

impl ValueSurface<'_> {
    pub fn theta(&self, q: usize, a: usize) -> f64 {
        self.theta[q * self.n_a + a]
    }

    pub fn target(&self, q: usize, a: usize) -> usize {
        self.target[q * self.n_a + a] as usize
    }

    pub fn exercise(&self, q: usize, a: usize) -> bool {
        self.exercise[q * self.n_a + a]
    }

    /// Values of one inventory row across the average grid.
    pub fn theta_row(&self, q: usize) -> &[f64] {
        &self.theta[q * self.n_a..(q + 1) * self.n_a]
    }
}

impl DaySurface {
    pub fn new(day: usize, node_offset: usize, n_nodes: usize, n_q: usize, n_a: usize) -> Self {
        let len = n_nodes * n_q * n_a;
        Self {
            day,
            node_offset,
            n_nodes,
            n_q,
            n_a,
            theta: vec![0.0; len],
            target: vec![0; len],
            exercise: vec![false; len],
        }
    }

    pub fn block(&self) -> usize {
        self.n_q * self.n_a
    }

    pub fn contains(&self, node: usize) -> bool {
        node >= self.node_offset && node < self.node_offset + self.n_nodes
    }

    /// View of the node with tree level / price index `node`.
    pub fn node(&self, node: usize) -> Result<ValueSurface<'_>> {
        if !self.contains(node) {
            return Err(AsrError::OutOfGrid(format!(
                "node {node} not stored on day {} (range {}..{})",
                self.day,
                self.node_offset,
                self.node_offset + self.n_nodes
            )));
        }
        let b = self.block();
        let start = (node - self.node_offset) * b;
        Ok(ValueSurface {
            n_q: self.n_q,
            n_a: self.n_a,
            theta: &self.theta[start..start + b],
            target: &self.target[start..start + b],
            exercise: &self.exercise[start..start + b],
        })
    }
}

/// Diagnostics gathered during a solve.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Average-price queries that fell outside the grid.
    pub extrapolated_queries: u64,
    pub total_queries: u64,
    /// Nodes where the factored kernel under/overflowed and the shifted
    /// log-sum-exp was used instead.
    pub fallback_nodes: u64,
    pub wall_time_secs: f64,
}

impl SolveStats {
    pub fn extrapolated_fraction(&self) -> f64 {
        if self.total_queries == 0 {
            0.0
        } else {
            self.extrapolated_queries as f64 / self.total_queries as f64
        }
    }
}

/// Output of a backward sweep: one surface per day (`days[n]`), possibly only
/// the root day when the solve was asked to keep just the price.
#[derive(Debug, Clone)]
pub struct PolicyCube {
    pub meta: CubeMeta,
    pub grids: Grids,
    pub days: Vec<Option<DaySurface>>,
    pub stats: SolveStats,
}

impl PolicyCube {
    pub fn model(&self) -> &AsrModel {
        &self.meta.model
    }

    pub fn horizon(&self) -> usize {
        self.meta.model.contract.days
    }

    pub fn day(&self, n: usize) -> Result<&DaySurface> {
        self.days
            .get(n)
            .and_then(|d| d.as_ref())
            .ok_or_else(|| AsrError::Format(format!("cube does not retain day {n}")))
    }

    pub fn is_complete(&self) -> bool {
        self.days.len() == self.horizon() + 1 && self.days.iter().all(|d| d.is_some())
    }

    /// Index of the root price node (S = S0).
    pub fn root_node(&self) -> usize {
        match self.meta.kind {
            CubeKind::Tree => 0,
            CubeKind::Impact => self.grids.s.as_ref().map(|s| s.center).unwrap_or(0),
        }
    }

    /// Value at day 0 with no inventory: the indifference price.
    pub fn root_value(&self) -> Result<f64> {
        let day0 = self.day(0)?;
        Ok(day0.node(self.root_node())?.theta(0, 0))
    }
}
