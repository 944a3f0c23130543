use serde::{Deserialize, Serialize};

use crate::environment::{GridSpec, ObstacleMask};
use crate::error::{Error, Result};

/// Square obstacles drifting east.
///
/// At `t >= entry_time` the lower-left corner of each square sits at
/// `initial + speed * (t - entry_time) * e_x` (cell units), rounded to the
/// nearest cell; the square covers `side x side` cells clipped to the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub side: usize,
    pub entry_time: f64,
    /// Cells per time step, toward the east.
    pub speed: f64,
    pub initial_positions: Vec<[f64; 2]>,
}

impl ObstacleConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.entry_time.is_finite() || !self.speed.is_finite() {
            return Err(Error::Config("obstacle entry_time and speed must be finite".into()));
        }
        if self.initial_positions.iter().flatten().any(|p| !p.is_finite()) {
            return Err(Error::Config("obstacle positions must be finite".into()));
        }
        Ok(())
    }
}

pub fn generate_obstacles(grid: &GridSpec, cfg: &ObstacleConfig) -> Result<ObstacleMask> {
    cfg.validate()?;
    let mut cells = vec![false; grid.n_states()];
    for t in 0..grid.nt {
        let tf = t as f64;
        if tf < cfg.entry_time {
            continue;
        }
        for p in &cfg.initial_positions {
            let i0 = (p[0] + cfg.speed * (tf - cfg.entry_time)).round() as i64;
            let j0 = p[1].round() as i64;
            for j in j0.max(0)..(j0 + cfg.side as i64).min(grid.ny as i64) {
                for i in i0.max(0)..(i0 + cfg.side as i64).min(grid.nx as i64) {
                    cells[grid.state(grid.cell(i as usize, j as usize), t)] = true;
                }
            }
        }
    }
    ObstacleMask::new(*grid, cells)
}
