//! Command-line front end: single runs, sweeps, dataset building, model
//! training, fairness comparisons and plotting.

pub mod commands;
pub mod error;
pub mod fairness;
pub mod plot;
pub mod sweep;
pub mod train;

pub use commands::{run, Cli};
pub use error::CliError;
