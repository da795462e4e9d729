//! Classic constructive heuristics.

pub mod insa;
pub mod pdr;

pub use insa::insa;
pub use pdr::{pdr_priority, pdr_randomized, pdr_samples, pdr_solve, Rule};
