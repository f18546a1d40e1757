//! Configuration, data export, and experiment drivers behind the `qspread`
//! command-line tool.
//!
//! Every run is a pure function of its [`config::RunConfig`]: fixed seeds,
//! fixed iteration orders, and text formatting with explicit precision, so
//! identical configs produce byte-identical artifacts.

pub mod config;
pub mod io;
pub mod run;

pub use config::{Experiment, RunConfig};
pub use run::{run, RunError, RunSummary};

/// Exit-status contract.
pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;
