//! Scenario-driven front end: config parsing, preset expansion, command
//! dispatch, and CSV/JSON report emission.

pub mod config;
pub mod run;
