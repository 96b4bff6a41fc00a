//! Desk-scale tasks, configuration, experiment orchestration and reporting
//! for the `adafrugal` optimizer, plus the `adafrugal-bench` CLI.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod report;
pub mod tasks;

pub use config::ExperimentConfig;
pub use error::{Result, WorkbenchError};
pub use tasks::{generate_task, TaskName};
