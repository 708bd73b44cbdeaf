//! Weak-convergence laboratory.
//!
//! Probability laws with exact evaluators and seeded samplers, generalized
//! inverses, order-statistic representations, empirical-process expansions,
//! delta-method propagation, and a catalog of limit-theorem scenarios checked
//! against exact oracles and Monte Carlo.

pub mod delta;
pub mod dist;
pub mod error;
pub mod fep;
pub mod lab;
pub mod mc;
pub mod numeric;
pub mod orderstats;
pub mod points;
pub mod quantile;
pub mod rng;

pub use error::{Error, Result};
