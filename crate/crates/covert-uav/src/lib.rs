//! Configuration files, Monte Carlo validation, reports and the experiment
//! CLI for the covert UAV planner in [`covert_uav_core`].

pub mod config;
pub mod experiment;
mod error;
pub mod oracle;
pub mod report;
pub mod units;
pub mod validate;

pub use error::{Error, Result};
