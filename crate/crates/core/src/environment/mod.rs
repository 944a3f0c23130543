//! The discretized spatio-temporal world: grid, reduced-order flow,
//! mean energy field, obstacle mask and action space.

mod actions;
pub mod container;
mod field;
mod grid;
mod obstacles;
mod scalar;

pub use actions::{Action, ActionSpace};
pub use field::{DoVelocityField, StorageFootprint};
pub use grid::GridSpec;
pub use obstacles::ObstacleMask;
pub use scalar::ScalarMeanField;

use crate::error::{contract, Result};

/// Everything the planner reads about the world. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    pub velocity: DoVelocityField,
    pub scalar: ScalarMeanField,
    pub obstacles: ObstacleMask,
}

impl Environment {
    pub fn new(velocity: DoVelocityField, scalar: ScalarMeanField, obstacles: ObstacleMask) -> Result<Self> {
        let g = velocity.grid();
        contract!(
            scalar.grid() == g && obstacles.grid() == g,
            "velocity, scalar and obstacle grids differ"
        );
        Ok(Self {
            velocity,
            scalar,
            obstacles,
        })
    }

    /// Flow only: zero energy field and no obstacles.
    pub fn flow_only(velocity: DoVelocityField) -> Self {
        let g = *velocity.grid();
        Self {
            velocity,
            scalar: ScalarMeanField::zeros(g),
            obstacles: ObstacleMask::empty(g),
        }
    }

    pub fn grid(&self) -> &GridSpec {
        self.velocity.grid()
    }

    pub fn n_realizations(&self) -> usize {
        self.velocity.n_realizations()
    }
}
