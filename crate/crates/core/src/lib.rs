//! Double-fairness policy learning: fairness metrics, existence checks for
//! fair rules on finite environments, and a Pareto-set estimator that trades
//! action fairness, outcome fairness and value.

pub mod data;
pub mod error;
pub mod existence;
pub mod fairness;
pub mod harness;
pub mod nuisance;
pub mod policy;
pub mod rng;
pub mod simplex;
pub mod solver;

pub use error::{Error, Result};
