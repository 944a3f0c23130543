//! Synthetic environments: a stochastic double gyre, a drifting cloud shadow
//! over a radiation field, and square obstacles moving east.

mod gyre;
mod obstacles;
mod radiation;
mod reduce;

pub use gyre::{generate_double_gyre, DoubleGyreConfig};
pub use obstacles::{generate_obstacles, ObstacleConfig};
pub use radiation::{generate_radiation, RadiationConfig};
pub use reduce::{reduce_order, VelocityEnsemble};
