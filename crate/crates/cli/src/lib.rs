//! Command-line front-end: dataset ingestion, test reports, simulation
//! tables and CIF plot data.

pub mod dataset;
pub mod error;
pub mod report;
pub mod scenario;

pub use error::{CliError, Result};
