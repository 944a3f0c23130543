use super::GridSpec;
use crate::error::{contract, Result};

/// Mean of the stochastic energy (radiation) field, `[t][y][x]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMeanField {
    grid: GridSpec,
    values: Vec<f32>,
}

impl ScalarMeanField {
    pub fn new(grid: GridSpec, values: Vec<f32>) -> Result<Self> {
        contract!(
            values.len() == grid.n_states(),
            "scalar field has {} entries, expected {}",
            values.len(),
            grid.n_states()
        );
        contract!(
            values.iter().all(|v| v.is_finite()),
            "scalar field contains non-finite values"
        );
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.n_states()],
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn at(&self, cell: usize, t: usize) -> f64 {
        self.values[self.grid.state(cell, t)] as f64
    }

    /// Snapshot of time layer `t`, `[y][x]`.
    pub fn layer(&self, t: usize) -> &[f32] {
        let nc = self.grid.n_cells();
        &self.values[t * nc..(t + 1) * nc]
    }
}
