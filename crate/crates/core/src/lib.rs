//! Job-shop scheduling with a self-labeling pointer network.
//!
//! Instances are solved constructively: at every step the policy picks a
//! job, and the job's next operation is placed as early as possible.

pub mod baselines;
pub mod bench;
pub mod error;
pub mod features;
pub mod instance;
pub mod io;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod schedule;
pub mod train;

pub use error::{Error, Result};
pub use instance::{generate_instance, Instance, Time};
pub use schedule::{validate_solution, PartialSchedule, Solution};
