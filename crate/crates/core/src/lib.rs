//! Two-sample tests for equality of cumulative incidence functions under
//! left truncation and right censoring.

pub mod approximation;
pub mod covariance;
pub mod error;
pub mod outcome;
pub mod procedure;
pub mod resampling;
pub mod simulation;
pub mod statistics;
pub mod step;
pub mod survival;

pub use error::{Error, Result};
pub use outcome::{Method, TestResult};
