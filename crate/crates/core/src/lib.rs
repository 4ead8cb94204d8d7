//! Soft Tournament Equilibrium: differentiable Top-Cycle and Uncovered-Set
//! cores for pairwise comparison data, with exact solvers, estimation,
//! synthetic benchmarks, baselines and evaluation.

pub mod baselines;
pub mod error;
pub mod evaluation;
pub mod estimation;
pub mod numerics;
pub mod soft;
pub mod synthetic;
pub mod tournament;

pub use error::{Error, Result};
