//! Scenario configuration, seeded sampling, file output, reports and the
//! command-line interface.

pub mod cli;
pub mod config;
pub mod io;
pub mod report;
pub mod run;
pub mod sampling;

pub use cli::cli_main;
pub use config::{Interval, KernelSpec, ScenarioConfig};
pub use report::{ExitStatus, RunReport};
pub use sampling::sample_initial_data;
