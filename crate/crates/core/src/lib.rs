//! Finite-horizon MDP path planning for marine vehicles in reduced-order
//! stochastic flow fields.
//!
//! The pipeline: synthesize (or load) an environment, build the sparse
//! transition model by counting ensemble outcomes, solve it by value
//! iteration, and roll the policy out over every realization.

pub mod cli;
pub mod config;
pub mod environment;
pub mod error;
pub mod model;
pub mod oracle;
pub mod rollout;
pub mod solver;
pub mod synthesis;

pub use error::{Error, Result};
