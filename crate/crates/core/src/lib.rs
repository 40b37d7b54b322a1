pub mod acquisition;
pub mod campaign;
pub mod cli;
pub mod design_space;
pub mod error;
pub mod explain;
pub mod gpr;
pub mod hitl;
pub mod oracle_sim;
pub mod pareto;
pub mod reports;
pub mod server_api;
pub mod stats;

pub use error::{Error, Result};
