pub mod baselines;
pub mod coordinator;
pub mod core_model;
pub mod error;
pub mod harness;
pub mod mem;
pub mod sim;
pub mod speculators;
pub mod telemetry;
pub mod trace;

pub use error::{Error, Result};
