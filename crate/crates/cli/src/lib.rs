//! Experiment runner for the switching QVI solvers: tables over `(c, rho)`
//! grids, switching regions, the zero-cost limit and property suites.

pub mod config;
pub mod experiment;
pub mod format;
pub mod hjb;
pub mod regions;
pub mod solve;
pub mod table;
pub mod verify;

pub use config::{parse_list, Case, ExperimentConfig, OutputFormat, Overrides};
pub use experiment::Experiment;
pub use table::{run_table, TableRow, TableRun};
