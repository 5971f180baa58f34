//! Configuration, verification suites and graph export for the command line.

pub mod config;
pub mod export;
pub mod suite;

pub use config::{parse_config, BackendSpec, Budgets, RunConfig, DEFAULT_CONFIG};
pub use export::{export_graph, parse_window, ExportFormat};
pub use suite::{run_suite, InvariantReport, Status, SuiteReport, SUITES};
