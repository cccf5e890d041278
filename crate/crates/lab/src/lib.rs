//! Experiment runner for `movecost-core`: synthetic environments, a
//! brute-force oracle for the closed-form update, JSON configs, CSV traces
//! and randomized property suites.

pub mod checks;
pub mod config;
pub mod env;
pub mod error;
pub mod oracle;
pub mod runner;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::LabError;
